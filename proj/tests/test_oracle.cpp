#include <cmath>

#include "deeplog/oracle.hpp"
#include "deeplog/parser.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace deeplog;
using deeplog::testing::alarm_model;
using deeplog::testing::ground_atom;

namespace {

VariableAssignment alarm_sigma(const Model& m) {
  return {{"V", m.constant_index.at("t1")}, {"S", m.constant_index.at("t2")}};
}

}  // namespace

TEST_CASE("alarm formula evaluates to 0.703 under the empty interpretation") {
  Model m = alarm_model();
  Interpretation empty;
  auto r = evaluate(m, m.formula("alarm_query").body, alarm_sigma(m), empty);
  CHECK(r.value.a == doctest::Approx(0.703).epsilon(1e-12));
  CHECK(r.interpretations == 4);  // 2 nested binders over booleans
}

TEST_CASE("marginalizing the factorized weights sums to one") {
  Model m = alarm_model();
  Interpretation empty;
  auto r = evaluate(m, m.formula("joint").body, alarm_sigma(m), empty);
  CHECK(r.value.a == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ground product formula under a fixed interpretation") {
  Model m = alarm_model();
  Interpretation i;
  i.values[ground_atom(m, "burglary", {"t1"})] = Value::boolean(true);
  i.values[ground_atom(m, "earthquake", {"t2"})] = Value::boolean(false);
  auto r = evaluate(m, m.formula("product").body, alarm_sigma(m), i);
  CHECK(r.value.a == doctest::Approx(0.7 * 0.99).epsilon(1e-12));
}

TEST_CASE("unassigned atoms outside binders are an error") {
  Model m = alarm_model();
  Interpretation empty;
  CHECK_THROWS_WITH_AS(evaluate(m, m.formula("product").body, alarm_sigma(m), empty),
                       doctest::Contains("unassigned atom outside any binder"), Error);
}

TEST_CASE("brute-force WMC matches the worked example and the degenerate cases") {
  Model m = alarm_model();
  const auto& logic = m.formula("logic_or").body;
  FormulaPtr ground = substitute(m, logic, alarm_sigma(m));
  auto w = table_weights(m, m.structure_id("prob"));
  CHECK(brute_force_wmc(m, ground, w) == doctest::Approx(0.703).epsilon(1e-12));

  // unsatisfiable and tautological cases
  StructId b = m.structure_id("bool");
  Atom batom;
  batom.pred = m.predicate_index.at("burglary");
  batom.args = {Term::make_const(m.constant_index.at("t1"))};
  FormulaPtr lit = f_atom(b, batom);
  FormulaPtr contradiction = f_binary(b, "and", lit, f_unary(b, "not", lit));
  FormulaPtr tautology = f_binary(b, "or", lit, f_unary(b, "not", lit));
  CHECK(brute_force_wmc(m, contradiction, w) == doctest::Approx(0.0));
  CHECK(brute_force_wmc(m, tautology, w) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("canonical aggregation formula equals brute-force WMC bit for bit") {
  Model m = alarm_model();
  StructId prob = m.structure_id("prob");
  const auto& logic = m.formula("logic_or").body;
  FormulaPtr ground_logic = substitute(m, logic, alarm_sigma(m));
  auto atoms = collect_ground_atoms(m, ground_logic);
  REQUIRE(atoms.size() == 2);

  // sum<a1> sum<a2> iverson(logic) * w(a1) * w(a2)
  int iv = -1;
  for (std::size_t t = 0; t < m.transformations.size(); ++t)
    if (m.transformations[t].name == "iverson") iv = static_cast<int>(t);
  REQUIRE(iv >= 0);
  FormulaPtr body = f_transform(prob, iv, ground_logic);
  for (const auto& g : atoms) {
    Atom a;
    a.pred = g.pred;
    for (ConstId c : g.args) a.args.push_back(Term::make_const(c));
    body = f_binary(prob, "mul", body, f_atom(prob, a));
  }
  FormulaPtr wmc = body;
  for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
    Atom a;
    a.pred = it->pred;
    for (ConstId c : it->args) a.args.push_back(Term::make_const(c));
    wmc = f_agg_atom(prob, a, "sum", wmc);
  }
  Interpretation empty;
  auto r = evaluate(m, wmc, {}, empty);
  double bf = brute_force_wmc(m, ground_logic, table_weights(m, prob));
  CHECK(r.value.a == bf);  // identical summation order: bit-exact
}

TEST_CASE("aggregating an atom absent from the logic leaves the value unchanged") {
  Model m = alarm_model();
  StructId prob = m.structure_id("prob");
  Atom b;
  b.pred = m.predicate_index.at("burglary");
  b.args = {Term::make_const(m.constant_index.at("t1"))};
  Atom e;
  e.pred = m.predicate_index.at("earthquake");
  e.args = {Term::make_const(m.constant_index.at("t2"))};

  // WMC of the single-literal logic b, with and without an irrelevant atom e
  // aggregated alongside its normalized weight factor
  int iv = -1;
  for (std::size_t t = 0; t < m.transformations.size(); ++t)
    if (m.transformations[t].name == "iverson") iv = static_cast<int>(t);
  REQUIRE(iv >= 0);
  StructId bs = m.structure_id("bool");
  FormulaPtr base =
      f_agg_atom(prob, b, "sum",
                 f_binary(prob, "mul", f_transform(prob, iv, f_atom(bs, b)), f_atom(prob, b)));
  FormulaPtr wrapped = f_agg_atom(
      prob, b, "sum",
      f_agg_atom(prob, e, "sum",
                 f_binary(prob, "mul",
                          f_binary(prob, "mul", f_transform(prob, iv, f_atom(bs, b)),
                                   f_atom(prob, b)),
                          f_atom(prob, e))));
  Interpretation empty;
  double v1 = evaluate(m, base, {}, empty).value.a;
  double v2 = evaluate(m, wrapped, {}, empty).value.a;
  CHECK(v1 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(v2 == doctest::Approx(v1).epsilon(1e-12));
}

TEST_CASE("evaluate is pure: identical inputs give bit-identical outputs") {
  Model m = alarm_model();
  Interpretation empty;
  auto r1 = evaluate(m, m.formula("alarm_query").body, alarm_sigma(m), empty);
  auto r2 = evaluate(m, m.formula("alarm_query").body, alarm_sigma(m), empty);
  CHECK(r1.value.a == r2.value.a);
}

TEST_CASE("enumerate_models lists satisfying interpretations lexicographically") {
  Model m = alarm_model();
  const auto& logic = m.formula("logic_or").body;
  FormulaPtr ground = substitute(m, logic, alarm_sigma(m));
  auto atoms = collect_ground_atoms(m, ground);
  auto models = enumerate_models(m, ground, atoms);
  REQUIRE(models.size() == 3);
  auto b = ground_atom(m, "burglary", {"t1"});
  auto e = ground_atom(m, "earthquake", {"t2"});
  CHECK(models[0].at(b).truthy());
  CHECK(models[0].at(e).truthy());
  CHECK(models[1].at(b).truthy());
  CHECK_FALSE(models[1].at(e).truthy());
  CHECK_FALSE(models[2].at(b).truthy());
  CHECK(models[2].at(e).truthy());

  // single-model and unsatisfiable cases
  StructId bs = m.structure_id("bool");
  Atom batom;
  batom.pred = b.pred;
  batom.args = {Term::make_const(b.args[0])};
  Atom eatom;
  eatom.pred = e.pred;
  eatom.args = {Term::make_const(e.args[0])};
  FormulaPtr conj = f_binary(bs, "and", f_atom(bs, batom), f_atom(bs, eatom));
  CHECK(enumerate_models(m, conj, atoms).size() == 1);
  FormulaPtr contradiction =
      f_binary(bs, "and", f_atom(bs, batom), f_unary(bs, "not", f_atom(bs, batom)));
  CHECK(enumerate_models(m, contradiction, atoms).empty());
}

TEST_CASE("fuzzy truth domain rejects aggregation over atoms") {
  Model m = parse_model_or_throw(R"(
structure fuzzy:product, prob.
domain d = {a}.
pred p(d).
truth fuzzy.
label p @ fuzzy:product : identity.
formula f(X:d) := or<fuzzy:product>(p(X)@fuzzy:product, p(X)@fuzzy:product).
)");
  Interpretation i;
  i.domain = TruthDomain::Fuzzy;
  i.values[ground_atom(m, "p", {"a"})] = Value::fuzzy(0.25);
  VariableAssignment sigma{{"X", m.constant_index.at("a")}};
  auto r = evaluate(m, m.formula("f").body, sigma, i);
  CHECK(r.value.a == doctest::Approx(0.25 + 0.25 - 0.0625));

  StructId fz = m.structure_id("fuzzy:product");
  Atom p;
  p.pred = m.predicate_index.at("p");
  p.args = {Term::make_const(m.constant_index.at("a"))};
  FormulaPtr agg = f_agg_atom(fz, p, "or", f_atom(fz, p));
  CHECK_THROWS_WITH_AS(evaluate(m, agg, {}, i),
                       doctest::Contains("not enumerable"), Error);
}
