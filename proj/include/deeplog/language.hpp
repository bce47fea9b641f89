#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "deeplog/algebra.hpp"
#include "deeplog/value.hpp"

namespace deeplog {

using ConstId = std::int32_t;
using DomainId = std::int32_t;
using PredId = std::int32_t;
using StructId = std::int32_t;

struct ConstantInfo {
  std::string symbol;
  std::optional<Eigen::VectorXd> payload;  // perception input, when declared
};

struct DomainInfo {
  std::string name;
  std::vector<ConstId> members;  // declared order
};

struct PredicateSignature {
  std::string name;
  std::vector<DomainId> domains;  // one per argument position
  std::size_t arity() const { return domains.size(); }
};

/// A term in a formula argument position: a constant or a variable.
struct Term {
  bool is_var = false;
  ConstId constant = -1;
  std::string var;

  static Term make_const(ConstId c) { return Term{false, c, {}}; }
  static Term make_var(std::string v) { return Term{true, -1, std::move(v)}; }
  bool operator==(const Term& o) const {
    return is_var == o.is_var && (is_var ? var == o.var : constant == o.constant);
  }
};

struct Atom {
  PredId pred = -1;
  std::vector<Term> args;
  bool operator==(const Atom& o) const { return pred == o.pred && args == o.args; }
  bool ground() const {
    for (const auto& t : args)
      if (t.is_var) return false;
    return true;
  }
};

struct GroundAtom {
  PredId pred = -1;
  std::vector<ConstId> args;
  auto operator<=>(const GroundAtom&) const = default;
};

enum class TruthDomain { Boolean, Fuzzy };

/// Partial map from ground atoms to truth values in the declared truth domain.
struct Interpretation {
  TruthDomain domain = TruthDomain::Boolean;
  std::map<GroundAtom, Value> values;

  bool has(const GroundAtom& a) const { return values.count(a) > 0; }
  const Value& at(const GroundAtom& a) const;
  Interpretation extend(const GroundAtom& a, const Value& v) const;
};

using VariableAssignment = std::map<std::string, ConstId>;

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// AST node of an algebraic formula. Every node carries the structure id its
/// value lives in; Transform nodes bridge structures.
struct Formula {
  enum class Kind { Atom, Const, Unary, Binary, AggAtom, AggVar, Transform };
  Kind kind = Kind::Atom;
  StructId sid = -1;

  Atom atom;             // Atom / AggAtom pattern
  Value constant;        // Const
  std::string op;        // Unary/Binary operator, AggAtom/AggVar aggregator
  FormulaPtr child;      // Unary/AggAtom/AggVar/Transform child, Binary lhs
  FormulaPtr rhs;        // Binary rhs
  std::string var;       // AggVar bound variable
  DomainId var_domain = -1;
  int transform = -1;    // Transform: index into Model::transformations
};

FormulaPtr f_atom(StructId sid, Atom a);
FormulaPtr f_const(StructId sid, Value v);
FormulaPtr f_unary(StructId sid, std::string op, FormulaPtr c);
FormulaPtr f_binary(StructId sid, std::string op, FormulaPtr l, FormulaPtr r);
FormulaPtr f_agg_atom(StructId sid, Atom pattern, std::string agg, FormulaPtr c);
FormulaPtr f_agg_var(StructId sid, std::string var, DomainId dom, std::string agg, FormulaPtr c);
FormulaPtr f_transform(StructId sid, int transform, FormulaPtr c);

bool formula_equal(const FormulaPtr& a, const FormulaPtr& b);

/// Deterministic atom ordering: predicate declaration order, then arguments
/// (constants precede variables; constant ids follow domain order).
bool atom_order_less(const Atom& a, const Atom& b);

enum class LabelKind { Identity, Table, Categorical, Perceptual };

/// Labelling entry for one (predicate, structure) pair.
struct LabelEntry {
  PredId pred = -1;
  StructId sid = -1;
  LabelKind kind = LabelKind::Identity;

  // Table: labels per ground instance as (label_false, label_true); a uniform
  // Bernoulli `p` fills (1-p, p) for every instance.
  std::optional<double> uniform_p;
  std::map<std::vector<ConstId>, std::pair<double, double>> table;

  // Categorical / Perceptual: class argument position (0-based) whose domain
  // the softmax runs over; -1 groups over the atom's own truth value.
  int class_arg = -1;

  // Perceptual: payload width and hidden layer width (0 = affine).
  int input_dim = 0;
  int hidden = 0;

  bool parametric() const {
    return kind == LabelKind::Categorical || kind == LabelKind::Perceptual;
  }
  /// True when the labels of a group are guaranteed to sum to one.
  bool normalized() const;
};

struct LabellingSpec {
  std::vector<LabelEntry> entries;
  const LabelEntry* find(PredId pred, StructId sid) const;
  LabelEntry* find(PredId pred, StructId sid);
};

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string message;
  int line = 0;
  int column = 0;
};

struct NamedFormula {
  std::string name;
  std::vector<std::pair<std::string, DomainId>> params;  // declared inputs
  FormulaPtr body;
};

/// A parsed, resolved model: predicates with finite domains, structures in
/// use, a labelling spec, and named formulas.
struct Model {
  std::vector<std::string> structures;  // names resolvable via structure_by_name
  std::vector<Transformation> transformations;
  std::vector<ConstantInfo> constants;
  std::vector<DomainInfo> domains;
  std::vector<PredicateSignature> predicates;
  TruthDomain truth = TruthDomain::Boolean;
  LabellingSpec labelling;
  std::vector<NamedFormula> formulas;

  std::map<std::string, StructId> structure_index;
  std::map<std::string, int> transformation_index;
  std::map<std::string, ConstId> constant_index;
  std::map<std::string, DomainId> domain_index;
  std::map<std::string, PredId> predicate_index;
  std::map<std::string, int> formula_index;

  StructId add_structure(const std::string& name);
  int add_transformation(const Transformation& t);
  ConstId add_constant(const std::string& symbol);
  DomainId add_domain(const std::string& name);
  PredId add_predicate(PredicateSignature sig);

  StructId structure_id(const std::string& name) const;
  const AlgebraicStructure& structure(StructId sid) const;
  const NamedFormula& formula(const std::string& name) const;
  const std::string& const_name(ConstId c) const { return constants[c].symbol; }

  bool in_domain(DomainId dom, ConstId c) const;
};

/// Replaces every free variable of `f` assigned by `sigma`; AggVar-bound
/// variables are untouched. Throws when a free variable is missing from
/// `sigma` or a constant violates its position's domain.
FormulaPtr substitute(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma);

/// Free variables in first-occurrence order (binders excluded).
std::vector<std::string> free_variables(const FormulaPtr& f);

std::vector<Diagnostic> check_well_formed(const Model& m);

/// All ground instantiations of every predicate, in declaration order.
/// Guarded at 1e7 atoms.
std::vector<GroundAtom> herbrand_base(const Model& m);

std::string print_atom(const Model& m, const Atom& a);
std::string print_ground_atom(const Model& m, const GroundAtom& a);
std::string print_formula(const Model& m, const FormulaPtr& f);
std::string print_model(const Model& m);

bool model_equal(const Model& a, const Model& b);

}  // namespace deeplog
