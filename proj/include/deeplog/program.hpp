#pragma once

#include <memory>
#include <optional>

#include "deeplog/language.hpp"

namespace deeplog {

/// Logic-program term: symbol, integer, variable, list (nil/cons), or a
/// compound (arithmetic expressions inside is/2).
struct PTerm {
  enum class Kind : std::uint8_t { Sym, Int, Var, Nil, Cons, Fn };
  Kind kind = Kind::Sym;
  std::string name;      // Sym / Var / Fn functor
  long long num = 0;     // Int
  std::vector<PTerm> args;  // Cons: head, tail; Fn: operands

  static PTerm sym(std::string s);
  static PTerm integer(long long v);
  static PTerm var(std::string v);
  static PTerm nil();
  static PTerm cons(PTerm head, PTerm tail);
  static PTerm fn(std::string functor, std::vector<PTerm> operands);

  bool operator==(const PTerm& o) const;
  std::string str() const;
};

struct PLiteral {
  std::string pred;
  std::vector<PTerm> args;
  bool negated = false;
  std::string str() const;
};

/// `l :: fact` annotations: a fixed probability or a neural labelling whose
/// inputs are the named head variables (remaining positions are class args).
struct Annotation {
  enum class Kind : std::uint8_t { Probability, Neural };
  Kind kind = Kind::Probability;
  double probability = 0.0;
  std::string network;
  std::vector<std::string> inputs;
};

struct Clause {
  PLiteral head;
  std::vector<PLiteral> body;
  std::optional<Annotation> annotation;
  bool is_fact() const { return body.empty(); }
};

struct Program {
  std::vector<Clause> clauses;
  // optional declarations: finite domains and predicate signatures, used for
  // grounding and for binding annotated predicates to model domains
  std::vector<std::pair<std::string, std::vector<std::string>>> domains;
  std::vector<std::pair<std::string, std::vector<std::string>>> predicates;

  std::vector<const Clause*> clauses_of(const std::string& pred) const;
  bool annotated(const std::string& pred) const;
};

/// Parses Prolog-style clause syntax with `l :: fact` and
/// `nn(name, Inputs...) :: pred(Args...)` annotations, plus optional
/// domain/pred declarations. Built-ins: between/3, is/2, length/2 with
/// integer arithmetic (+, -, *, mod, div, **).
Program parse_program(const std::string& text);

/// All ground instances of every clause whose built-ins succeed. Variables
/// take the domains of the declared predicate positions they occupy.
/// Guarded at 1e6 clauses.
std::vector<Clause> ground_program(const Program& p);

struct ProveOptions {
  std::int64_t max_depth = 10'000;  // resolution steps along one branch
};

/// An annotated ground fact consumed by a proof, with a polarity.
struct ProofLiteral {
  std::string pred;
  std::vector<PTerm> args;  // ground
  bool positive = true;
  auto key() const { return std::make_tuple(pred, str_args(), positive); }
  std::string str_args() const;
};

/// Proofs interned against a shared literal table: each proof is a sorted,
/// deduplicated list of literal ids, grouped by the walked query arguments.
struct ProveResult {
  std::vector<ProofLiteral> literals;              // distinct leaves
  std::vector<std::vector<std::int32_t>> proofs;   // deduplicated disjuncts
  std::vector<std::int32_t> proof_answer;          // answer id per proof
  std::vector<std::vector<PTerm>> answers;         // distinct walked query args

  std::size_t num_proofs() const { return proofs.size(); }
};

/// SLD proof enumeration. Deterministic built-ins and unannotated derived
/// atoms unfold away; leaves are annotated facts. Proofs assigning two
/// classes to one neural group instance are pruned (mutual exclusivity).
ProveResult prove(const Program& p, const std::vector<PLiteral>& goals,
                  const ProveOptions& options = {});

/// A program bound to a model: annotated predicates become model predicates
/// with identity Boolean labels and probabilistic labellings (tables for
/// `l::f`, categorical groups for neural annotations).
struct Frontend {
  Program program;
  Model model;
  ProveOptions options;
};

Frontend make_frontend(const Program& p);

struct AnswerFormula {
  std::string answer;              // printed ground query instance
  std::vector<PTerm> answer_args;  // walked query arguments
  NamedFormula formula;            // weighted-model-count shape over prob
  std::size_t proof_count = 0;
};

struct ToDeepLogOptions {
  // placeholder constants lifted to formula parameters, e.g. img0 -> I0
  std::vector<std::pair<std::string, std::string>> lift;
};

/// Boolean proof formula of a fixed ground goal conjunction: exactly-one
/// constraints for every touched neural group, conjoined with the
/// disjunction over proofs. Returns constant false when nothing is provable.
FormulaPtr prove_formula(Frontend& fe, const std::vector<PLiteral>& goals);

struct AnswerGroup {
  std::string answer;
  std::vector<PTerm> answer_args;
  std::vector<std::int32_t> proof_ids;
};

struct GroupedProofs {
  ProveResult result;
  std::vector<AnswerGroup> groups;  // ascending answer order
};

/// Proves the goals and groups the proofs by distinct ground answer.
GroupedProofs prove_grouped(Frontend& fe, const std::vector<PLiteral>& goals);

/// Wraps a proof set as a weighted-model-count formula (exactly-one
/// constraints, proof disjunction, factorized weights).
NamedFormula wrap_answer(Frontend& fe, const ProveResult& proofs,
                         const std::vector<std::int32_t>& proof_ids, const std::string& name,
                         const ToDeepLogOptions& options = {});

/// Proves `query` (free variables enumerate answers) and wraps each distinct
/// ground answer as a weighted-model-count formula over the model.
std::vector<AnswerFormula> to_deeplog(Frontend& fe, const PLiteral& query,
                                      const ToDeepLogOptions& options = {});

/// Same translation for a conjunction of goals evaluated as one query.
AnswerFormula to_deeplog_conjunction(Frontend& fe, const std::vector<PLiteral>& goals,
                                     const std::string& name,
                                     const ToDeepLogOptions& options = {});

PLiteral parse_query(const std::string& text);

}  // namespace deeplog
