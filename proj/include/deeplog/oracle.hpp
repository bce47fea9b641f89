#pragma once

#include <functional>

#include "deeplog/language.hpp"

namespace deeplog {

/// Resolves the label of a ground algebraic atom given its truth value.
struct LeafResolver {
  virtual ~LeafResolver() = default;
  virtual Value label(const Model& m, const GroundAtom& atom, StructId sid,
                      const Value& truth) const = 0;
};

/// Identity and table labellings straight from the model; parametric entries
/// are a lookup error (they need a parameter store, see the circuit runtime).
struct TableResolver : LeafResolver {
  Value label(const Model& m, const GroundAtom& atom, StructId sid,
              const Value& truth) const override;
};

struct OracleResult {
  Value value;
  std::uint64_t interpretations = 0;  // complete truth assignments enumerated
  std::uint64_t assignments = 0;      // complete variable assignments enumerated
};

/// Reference evaluation by direct recursion and exhaustive enumeration.
OracleResult evaluate(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma,
                      const Interpretation& interp, const LeafResolver& leaves);

OracleResult evaluate(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma,
                      const Interpretation& interp);

/// Truth value of a purely Boolean formula under a total interpretation.
bool eval_boolean(const Model& m, const FormulaPtr& logic, const Interpretation& interp);

using WeightFn = std::function<double(const GroundAtom&, bool truth)>;

/// Distinct ground atoms of a formula, in Herbrand-base order.
std::vector<GroundAtom> collect_ground_atoms(const Model& m, const FormulaPtr& f);

/// Sum over all 2^n total interpretations of the indicator of `logic` times
/// the product of per-atom weights. Guarded at n <= 24.
double brute_force_wmc(const Model& m, const FormulaPtr& logic, const WeightFn& weights);

/// WeightFn reading Bernoulli tables of the model's labelling at `sid`.
WeightFn table_weights(const Model& m, StructId sid);

/// All satisfying total interpretations over `atoms`, in lexicographic order
/// of the atom list with true before false. Guarded at |atoms| <= 24.
std::vector<Interpretation> enumerate_models(const Model& m, const FormulaPtr& logic,
                                             const std::vector<GroundAtom>& atoms);

}  // namespace deeplog
