#include <cmath>
#include <random>

#include "deeplog/compiler.hpp"
#include "deeplog/oracle.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/helpers.hpp"

using namespace deeplog;
using namespace deeplog::testing;

namespace {

double eval_single(const Model& m, const Circuit& c, const ParameterStore& params) {
  Layerization plan = layerize(m, c);
  return eval_forward(m, c, plan, params, Batch::single())(0, 0);
}

int count_kind(const Circuit& c, CircuitNode::Kind k) {
  int n = 0;
  for (const auto& nd : c.nodes) n += nd.kind == k;
  return n;
}

}  // namespace

TEST_CASE("push_transformation turns the alarm d-DNNF into a 0.703 circuit") {
  Model m = alarm_model();
  VariableAssignment sigma{{"V", m.constant_index.at("t1")}, {"S", m.constant_index.at("t2")}};
  FormulaPtr logic = substitute(m, m.formula("logic_or").body, sigma);
  BoolNnf nnf = to_nnf(m, logic);
  NnfId compiled = shannon_compile(nnf, default_atom_order(m, nnf));
  Circuit c =
      push_transformation(m, nnf, compiled, iverson(), {}, "alarm_pushed");
  ParameterStore params(m, 1);
  CHECK(eval_single(m, c, params) == doctest::Approx(0.703).epsilon(1e-12));

  // constant cases
  BoolNnf taut = to_nnf(m, f_const(m.structure_id("bool"), Value::boolean(true)));
  Circuit ct = push_transformation(m, taut, taut.root, iverson(), {}, "taut");
  CHECK(eval_single(m, ct, params) == doctest::Approx(1.0));
  BoolNnf contra = to_nnf(m, f_const(m.structure_id("bool"), Value::boolean(false)));
  Circuit cf = push_transformation(m, contra, contra.root, iverson(), {}, "contra");
  CHECK(eval_single(m, cf, params) == doctest::Approx(0.0));
}

TEST_CASE("push_transformation rejects non-d-DNNF input") {
  Model m = alarm_model();
  VariableAssignment sigma{{"V", m.constant_index.at("t1")}, {"S", m.constant_index.at("t2")}};
  FormulaPtr logic = substitute(m, m.formula("logic_or").body, sigma);
  BoolNnf nnf = to_nnf(m, logic);  // raw b|e is not deterministic
  CHECK_THROWS_WITH_AS(push_transformation(m, nnf, nnf.root, iverson(), {}, "bad"),
                       doctest::Contains("non-d-DNNF"), Error);
}

TEST_CASE("resolve_aggregations produces the optimized alarm circuit") {
  Model m = alarm_model();
  CompilationStats stats;
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"), &stats);
  // nn_b + (1 - nn_b) x nn_e: three weight leaves, one product, one sum
  CHECK(count_kind(c, CircuitNode::Kind::Leaf) == 3);
  CHECK(count_kind(c, CircuitNode::Kind::Op) == 2);
  CHECK(count_kind(c, CircuitNode::Kind::Const) == 0);
  CHECK(stats.input_atoms == 2);

  // slots V, S evaluated against constant rows
  ParameterStore params(m, 1);
  Layerization plan = layerize(m, c);
  Batch batch;
  batch.rows = 1;
  batch.slots.resize(2);
  batch.slots[0].constants = std::vector<ConstId>{m.constant_index.at("t1")};
  batch.slots[1].constants = std::vector<ConstId>{m.constant_index.at("t2")};
  double v = eval_forward(m, c, plan, params, batch)(0, 0);
  CHECK(v == doctest::Approx(0.703).epsilon(1e-12));
}

TEST_CASE("single positive literal resolves to its weight leaf") {
  Model m = propositional_model(1, 3);
  StructId bs = m.structure_id("bool");
  FormulaPtr logic = f_atom(bs, prop_atom(m, 0));
  NamedFormula nf{"lit", {}, make_wmc_formula(m, logic, collect_ground_atoms(m, logic))};
  Circuit c = resolve_aggregations(m, nf);
  REQUIRE(c.size() == 1);
  CHECK(c.nodes[0].kind == CircuitNode::Kind::Leaf);
  CHECK(c.leaves[0].component == 1);
}

TEST_CASE("non-factorized weight parts are rejected with guidance") {
  Model m = propositional_model(2, 3);
  StructId bs = m.structure_id("bool");
  StructId ps = m.structure_id("prob");
  FormulaPtr logic = f_binary(bs, "or", f_atom(bs, prop_atom(m, 0)),
                              f_atom(bs, prop_atom(m, 1)));
  int iv = m.transformation_index.at("iverson");
  FormulaPtr weights = f_binary(ps, "add", f_atom(ps, prop_atom(m, 0)),
                                f_atom(ps, prop_atom(m, 1)));
  FormulaPtr body = f_binary(ps, "mul", f_transform(ps, iv, logic), weights);
  for (int i = 1; i >= 0; --i) body = f_agg_atom(ps, prop_atom(m, i), "sum", body);
  NamedFormula nf{"bad", {}, body};
  CHECK_THROWS_WITH_AS(resolve_aggregations(m, nf),
                       doctest::Contains("non-factorized weight part"), Error);
}

TEST_CASE("random WMC formulas: circuit value equals brute-force WMC") {
  const int kAtoms = 3;
  Model m = propositional_model(kAtoms, 11);
  std::mt19937_64 rng(31337);
  std::vector<GroundAtom> all_atoms;
  for (int i = 0; i < kAtoms; ++i) all_atoms.push_back(GroundAtom{prop_atom(m, i).pred, {}});
  for (int trial = 0; trial < 50; ++trial) {
    FormulaPtr logic = random_bool_formula(m, kAtoms, 3, rng);
    NamedFormula nf{"t", {}, make_wmc_formula(m, logic, all_atoms)};
    Circuit c = resolve_aggregations(m, nf);
    ParameterStore params(m, 1);
    double compiled = eval_single(m, c, params);
    double brute = brute_force_wmc(m, logic, table_weights(m, m.structure_id("prob")));
    CAPTURE(trial);
    CHECK(compiled == doctest::Approx(brute).epsilon(1e-9));
  }
}

TEST_CASE("categorical exactly-one groups split as one k-way decision") {
  // two 3-class images, logic = exactly-one(d(i1,*)) & exactly-one(d(i2,*)) &
  // "classes agree": P = sum_k p1_k p2_k
  Model m = parse_model_or_throw(R"(
structure prob, bool.
domain img = {i1, i2}.
domain cls = {0, 1, 2}.
pred d(img, cls).
truth bool.
label d @ bool : identity.
label d @ prob : categorical(class=2).
)");
  m.add_transformation(iverson());
  StructId bs = m.structure_id("bool");
  StructId ps = m.structure_id("prob");

  auto atom = [&](const char* img, int k) {
    Atom a;
    a.pred = m.predicate_index.at("d");
    a.args = {Term::make_const(m.constant_index.at(img)),
              Term::make_const(m.constant_index.at(std::to_string(k)))};
    return a;
  };
  std::vector<Atom> g1, g2;
  for (int k = 0; k < 3; ++k) {
    g1.push_back(atom("i1", k));
    g2.push_back(atom("i2", k));
  }
  FormulaPtr agree;
  for (int k = 0; k < 3; ++k) {
    FormulaPtr both = f_binary(bs, "and", f_atom(bs, g1[k]), f_atom(bs, g2[k]));
    agree = agree ? f_binary(bs, "or", agree, both) : both;
  }
  FormulaPtr logic = f_binary(bs, "and", f_binary(bs, "and", exactly_one_formula(m, bs, g1),
                                                  exactly_one_formula(m, bs, g2)),
                              agree);
  std::vector<GroundAtom> atoms;
  for (const auto& a : g1) atoms.push_back(GroundAtom{a.pred, {a.args[0].constant, a.args[1].constant}});
  for (const auto& a : g2) atoms.push_back(GroundAtom{a.pred, {a.args[0].constant, a.args[1].constant}});
  NamedFormula nf{"agree", {}, make_wmc_formula(m, logic, atoms)};

  CompilationStats stats;
  Circuit c = resolve_aggregations(m, nf, &stats);
  ParameterStore params(m, 42);
  StoreResolver leaves(params);
  double compiled = eval_single(m, c, params);

  // oracle over the full formula with the same parametric weights
  Interpretation empty;
  double oracle_value = evaluate(m, nf.body, {}, empty, leaves).value.a;
  CHECK(compiled == doctest::Approx(oracle_value).epsilon(1e-9));

  // analytic: sum_k p1_k p2_k
  auto scores = [&](const char* img) {
    GroundAtom g{m.predicate_index.at("d"),
                 {m.constant_index.at(img), m.constant_index.at("0")}};
    std::vector<double> p;
    for (int k = 0; k < 3; ++k) {
      GroundAtom gk{g.pred, {g.args[0], m.constant_index.at(std::to_string(k))}};
      p.push_back(leaves.label(m, gk, ps, Value::boolean(true)).a);
    }
    return p;
  };
  auto p1 = scores("i1"), p2 = scores("i2");
  double expected = p1[0] * p2[0] + p1[1] * p2[1] + p1[2] * p2[2];
  CHECK(compiled == doctest::Approx(expected).epsilon(1e-9));
  // group splits keep the circuit compact: 6 class leaves, 3 products, 1 sum
  CHECK(count_kind(c, CircuitNode::Kind::Leaf) == 6);
}

TEST_CASE("compile_fuzzy maps formulas structurally") {
  const char* text = R"(
structure fuzzy:product, fuzzy:godel, fuzzy:lukasiewicz.
domain d = {x}.
pred a(d).
pred b(d).
pred c(d).
truth fuzzy.
label a @ fuzzy:product : table(0.5).
label b @ fuzzy:product : table(0.5).
label c @ fuzzy:product : table(0.5).
formula f(X:d) := and<fuzzy:product>(a(X)@fuzzy:product,
                                     or<fuzzy:product>(b(X)@fuzzy:product, c(X)@fuzzy:product)).
)";
  Model m = parse_model_or_throw(text);
  Circuit c = compile_fuzzy(m, m.formula("f"));
  ParameterStore params(m, 1);
  Layerization plan = layerize(m, c);
  Batch batch;
  batch.rows = 1;
  batch.slots.resize(1);
  batch.slots[0].constants = std::vector<ConstId>{m.constant_index.at("x")};
  CHECK(eval_forward(m, c, plan, params, batch)(0, 0) == doctest::Approx(0.375));

  // same shape under godel: min(0.5, max(0.5, 0.5)) = 0.5
  Model mg = parse_model_or_throw(R"(
structure fuzzy:godel.
domain d = {x}.
pred a(d).
pred b(d).
pred c(d).
truth fuzzy.
label a @ fuzzy:godel : table(0.5).
label b @ fuzzy:godel : table(0.5).
label c @ fuzzy:godel : table(0.5).
formula f(X:d) := and<fuzzy:godel>(a(X)@fuzzy:godel,
                                   or<fuzzy:godel>(b(X)@fuzzy:godel, c(X)@fuzzy:godel)).
)");
  Circuit cg = compile_fuzzy(mg, mg.formula("f"));
  ParameterStore pg(mg, 1);
  Layerization pgl = layerize(mg, cg);
  Batch bg;
  bg.rows = 1;
  bg.slots.resize(1);
  bg.slots[0].constants = std::vector<ConstId>{mg.constant_index.at("x")};
  CHECK(eval_forward(mg, cg, pgl, pg, bg)(0, 0) == doctest::Approx(0.5));

  // lukasiewicz tautology a | ~a at 0.3: min(1, 0.3 + 0.7) = 1
  Model ml = parse_model_or_throw(R"(
structure fuzzy:lukasiewicz.
domain d = {x}.
pred a(d).
truth fuzzy.
label a @ fuzzy:lukasiewicz : table(0.3).
formula f(X:d) := or<fuzzy:lukasiewicz>(a(X)@fuzzy:lukasiewicz,
                                        not(a(X)@fuzzy:lukasiewicz)).
)");
  Circuit cl = compile_fuzzy(ml, ml.formula("f"));
  ParameterStore pl(ml, 1);
  Layerization pll = layerize(ml, cl);
  Batch bl;
  bl.rows = 1;
  bl.slots.resize(1);
  bl.slots[0].constants = std::vector<ConstId>{ml.constant_index.at("x")};
  CHECK(eval_forward(ml, cl, pll, pl, bl)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("compile_fuzzy rejects aggregation over atoms") {
  Model m = parse_model_or_throw(R"(
structure fuzzy:product.
domain d = {x}.
pred a(d).
truth fuzzy.
label a @ fuzzy:product : table(0.5).
)");
  StructId fz = m.structure_id("fuzzy:product");
  Atom a;
  a.pred = m.predicate_index.at("a");
  a.args = {Term::make_const(m.constant_index.at("x"))};
  NamedFormula nf{"g", {}, f_agg_atom(fz, a, "or", f_atom(fz, a))};
  CHECK_THROWS_WITH_AS(compile_fuzzy(m, nf), doctest::Contains("sampled-expectation"), Error);
}

TEST_CASE("simplify applies neutral, annihilator and idempotent rules") {
  Model m = propositional_model(2, 5);
  StructId ps = m.structure_id("prob");

  // x * 1 -> x
  {
    CircuitBuilder b(m);
    std::int32_t x = b.leaf(1, LeafAtom{prop_atom(m, 0).pred, {}}, 1);
    std::int32_t one = b.constant(ps, Value::real(1.0));
    b.add_root(b.op(ps, OpCode::Mul, {x, one}));
    Circuit c = simplify(m, b.finish("t1", {}));
    CHECK(c.size() == 1);
    CHECK(c.nodes[c.roots[0]].kind == CircuitNode::Kind::Leaf);
  }
  // x * 0 -> 0
  {
    CircuitBuilder b(m);
    std::int32_t x = b.leaf(1, LeafAtom{prop_atom(m, 0).pred, {}}, 1);
    std::int32_t zero = b.constant(ps, Value::real(0.0));
    b.add_root(b.op(ps, OpCode::Mul, {x, zero}));
    Circuit c = simplify(m, b.finish("t2", {}));
    REQUIRE(c.nodes[c.roots[0]].kind == CircuitNode::Kind::Const);
    CHECK(c.consts[c.nodes[c.roots[0]].a].a == 0.0);
  }
  // x or x -> x under the Boolean structure (declared idempotent)
  {
    Model mb = propositional_model(1, 6);
    StructId bs = mb.structure_id("bool");
    CircuitBuilder b(mb);
    std::int32_t x = b.leaf(0, LeafAtom{prop_atom(mb, 0).pred, {}}, 1);
    // force two distinct node slots around the same leaf via a not-not chain
    std::int32_t nn = b.op(bs, OpCode::Not, {b.op(bs, OpCode::Not, {x})});
    b.add_root(b.op(bs, OpCode::Or, {nn, nn}));
    Circuit c = simplify(mb, b.finish("t3", {}));
    // the or-node over identical children collapsed
    bool has_or = false;
    for (const auto& n : c.nodes)
      has_or |= n.kind == CircuitNode::Kind::Op && n.op == OpCode::Or;
    CHECK_FALSE(has_or);
  }
}

TEST_CASE("simplify preserves circuit semantics on random parameterizations") {
  const int kAtoms = 4;
  Model m = propositional_model(kAtoms, 17);
  std::mt19937_64 rng(99);
  std::vector<GroundAtom> atoms;
  for (int i = 0; i < kAtoms; ++i) atoms.push_back(GroundAtom{prop_atom(m, i).pred, {}});
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  for (int trial = 0; trial < 25; ++trial) {
    FormulaPtr logic = random_bool_formula(m, kAtoms, 3, rng);
    BoolNnf nnf = to_nnf(m, logic);
    NnfId compiled = shannon_compile(nnf, default_atom_order(m, nnf));
    Circuit c = push_transformation(m, nnf, compiled, iverson(), {}, "t");
    Circuit s = simplify(m, c);
    CHECK(s.size() <= c.size());
    for (int rep = 0; rep < 40; ++rep) {
      for (auto& e : m.labelling.entries)
        if (e.kind == LabelKind::Table) e.uniform_p = unif(rng);
      ParameterStore params(m, 1);
      double v1 = eval_single(m, c, params);
      double v2 = eval_single(m, s, params);
      CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
    }
  }
}
