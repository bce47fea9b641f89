#pragma once

#include <random>
#include <string>
#include <vector>

#include "deeplog/language.hpp"
#include "deeplog/oracle.hpp"
#include "deeplog/parser.hpp"

namespace deeplog::testing {

/// Model with `n` propositional atoms a0..a(n-1), Bernoulli prob tables and
/// identity bool labels. Weights are seeded and normalized.
inline Model propositional_model(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  std::string text = "structure prob, bool.\n";
  for (int i = 0; i < n; ++i) text += "pred a" + std::to_string(i) + ".\n";
  text += "truth bool.\n";
  for (int i = 0; i < n; ++i) {
    double p = unif(rng);
    text += "label a" + std::to_string(i) + " @ bool : identity.\n";
    text += "label a" + std::to_string(i) + " @ prob : table(" + std::to_string(p) + ").\n";
  }
  Model m = parse_model_or_throw(text);
  m.add_transformation(iverson());
  return m;
}

inline Atom prop_atom(const Model& m, int i) {
  Atom a;
  a.pred = m.predicate_index.at("a" + std::to_string(i));
  return a;
}

/// Random Boolean formula over atoms a0..a(n-1) with and/or/not.
inline FormulaPtr random_bool_formula(const Model& m, int n, int max_depth,
                                      std::mt19937_64& rng) {
  StructId b = m.structure_id("bool");
  std::uniform_int_distribution<int> pick_atom(0, n - 1);
  std::uniform_int_distribution<int> pick_op(0, 2);
  std::function<FormulaPtr(int)> rec = [&](int depth) -> FormulaPtr {
    if (depth <= 0 || std::uniform_int_distribution<int>(0, 3)(rng) == 0)
      return f_atom(b, prop_atom(m, pick_atom(rng)));
    switch (pick_op(rng)) {
      case 0: return f_unary(b, "not", rec(depth - 1));
      case 1: return f_binary(b, "and", rec(depth - 1), rec(depth - 1));
      default: return f_binary(b, "or", rec(depth - 1), rec(depth - 1));
    }
  };
  return rec(max_depth);
}

/// Canonical WMC formula: sum<a_1>..sum<a_n> iverson(logic) * w(a_1) * ...
inline FormulaPtr make_wmc_formula(const Model& m, const FormulaPtr& logic,
                                   const std::vector<GroundAtom>& atoms) {
  StructId prob = m.structure_id("prob");
  int iverson_id = -1;
  for (std::size_t t = 0; t < m.transformations.size(); ++t)
    if (m.transformations[t].name == "iverson") iverson_id = static_cast<int>(t);
  if (iverson_id < 0) fail("model lacks the iverson transformation");
  FormulaPtr body = f_transform(prob, iverson_id, logic);
  for (const auto& g : atoms) {
    Atom a;
    a.pred = g.pred;
    for (ConstId c : g.args) a.args.push_back(Term::make_const(c));
    body = f_binary(prob, "mul", body, f_atom(prob, a));
  }
  for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
    Atom a;
    a.pred = it->pred;
    for (ConstId c : it->args) a.args.push_back(Term::make_const(c));
    body = f_agg_atom(prob, a, "sum", body);
  }
  return body;
}

}  // namespace deeplog::testing
