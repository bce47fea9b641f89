#pragma once

#include "deeplog/circuit.hpp"
#include "deeplog/nnf.hpp"

namespace deeplog {

struct CompilationStats {
  std::size_t input_atoms = 0;
  std::size_t ddnnf_nodes = 0;
  std::size_t circuit_nodes = 0;
  std::size_t cache_hits = 0;
  double wall_ms = 0.0;
};

/// Canonical exactly-one constraint over a categorical group, as emitted by
/// the frontend and recognized structurally by the compiler:
///   or_k ( a_k and not a_0 ... and not a_{k-1} and not a_{k+1} ... )
FormulaPtr exactly_one_formula(const Model& m, StructId bool_sid,
                               const std::vector<Atom>& members);

/// Rewrites a smooth d-DNNF into a circuit over the transformation's target:
/// and -> mul, or -> add, literals -> weight leaves at the literal's truth
/// value. Rejects inputs that fail the d-DNNF structural checks.
Circuit push_transformation(const Model& m, const BoolNnf& nnf, NnfId ddnnf,
                            const Transformation& t,
                            const std::vector<std::pair<std::string, DomainId>>& params,
                            const std::string& name);

/// Resolves a weighted-model-count shaped formula
///   sum<a_1> ... sum<a_n> transform<prob,iverson>(logic) * w(a_i) * ...
/// into a single optimized circuit: the logic is Shannon-compiled with
/// categorical groups split as one k-way decision, weight leaves attach per
/// literal, and normalized marginals are eliminated.
Circuit resolve_aggregations(const Model& m, const NamedFormula& nf,
                             CompilationStats* stats = nullptr);

/// Direct structural mapping of a fuzzy formula to a circuit (no knowledge
/// compilation). Aggregation over atoms is rejected; aggregation over
/// variables unrolls across the domain.
Circuit compile_fuzzy(const Model& m, const NamedFormula& nf);

/// Fixed-point simplification: constant folding, neutral/annihilator
/// elimination, idempotent deduplication, subexpression sharing, dead-node
/// removal. Preserves semantics.
Circuit simplify(const Model& m, const Circuit& c);

}  // namespace deeplog
