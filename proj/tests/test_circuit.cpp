#include <cmath>
#include <random>
#include <sstream>

#include "deeplog/compiler.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/helpers.hpp"

using namespace deeplog;
using namespace deeplog::testing;

namespace {

// alarm with learnable Bernoulli labels instead of frozen tables
const char* kAlarmParametric = R"(
structure prob, bool.
domain video = {t1}.
domain seismic = {t2}.
pred burglary(video).
pred earthquake(seismic).
truth bool.
label burglary @ bool : identity.
label earthquake @ bool : identity.
label burglary @ prob : categorical().
label earthquake @ prob : categorical().
formula alarm_query(V:video, S:seismic) :=
    sum<burglary(V)> sum<earthquake(S)>
      transform<prob, iverson>( or<bool>(burglary(V)@bool, earthquake(S)@bool) )
      * ( burglary(V)@prob * earthquake(S)@prob ).
)";

Batch alarm_batch(const Model& m, int rows = 1) {
  Batch b;
  b.rows = rows;
  b.slots.resize(2);
  b.slots[0].constants = std::vector<ConstId>(rows, m.constant_index.at("t1"));
  b.slots[1].constants = std::vector<ConstId>(rows, m.constant_index.at("t2"));
  return b;
}

}  // namespace

TEST_CASE("compose joins circuits under an operator") {
  Model m = propositional_model(2, 1);
  StructId ps = m.structure_id("prob");
  CircuitBuilder b1(m);
  b1.add_root(b1.leaf(1, LeafAtom{prop_atom(m, 0).pred, {}}, 1));
  Circuit c1 = b1.finish("a", {});
  CircuitBuilder b2(m);
  b2.add_root(b2.leaf(3, LeafAtom{prop_atom(m, 1).pred, {}}, 1));
  Circuit c2 = b2.finish("b", {});

  Circuit joined = compose(c1, c2, "mul", "prob");
  CHECK(joined.size() == 3);
  ParameterStore params(m, 1);
  Layerization plan = layerize(m, joined);
  double v = eval_forward(m, joined, plan, params, Batch::single())(0, 0);
  double wa = m.labelling.entries[1].uniform_p.value();
  double wb = m.labelling.entries[3].uniform_p.value();
  CHECK(v == doctest::Approx(wa * wb).epsilon(1e-12));
  (void)ps;

  // mismatched structures without a transform are rejected
  Model mb = alarm_model();
  StructId bs = mb.structure_id("bool");
  CircuitBuilder bb(mb);
  Atom batom;
  batom.pred = mb.predicate_index.at("burglary");
  batom.args = {Term::make_const(mb.constant_index.at("t1"))};
  bb.add_root(bb.leaf(0, LeafAtom{batom.pred, {ArgRef::constant(batom.args[0].constant)}}, 1));
  Circuit cb = bb.finish("bool_leaf", {});
  (void)bs;
  CHECK_THROWS_WITH_AS(compose(joined, joined, "or", "bool"),
                       doctest::Contains("structure mismatch"), Error);
}

TEST_CASE("layerize slices by longest-path depth") {
  Model m = alarm_model();
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  Layerization plan = layerize(m, c);
  // leaves; the product; the sum
  CHECK(plan.num_layers() == 3);

  // chain of depth d has d+1 layers
  Model mp = propositional_model(1, 2);
  StructId ps = mp.structure_id("prob");
  CircuitBuilder b(mp);
  std::int32_t n = b.leaf(1, LeafAtom{prop_atom(mp, 0).pred, {}}, 1);
  std::int32_t one = b.constant(ps, Value::real(1.0));
  for (int d = 0; d < 5; ++d) n = b.op(ps, OpCode::Mul, {n, one});
  b.add_root(n);
  Circuit chain = b.finish("chain", {});
  CHECK(layerize(mp, chain).num_layers() == 6);

  // three-node product
  CircuitBuilder b2(mp);
  b2.add_root(b2.op(ps, OpCode::Mul,
                    {b2.leaf(1, LeafAtom{prop_atom(mp, 0).pred, {}}, 1),
                     b2.leaf(1, LeafAtom{prop_atom(mp, 0).pred, {}}, 0)}));
  CHECK(layerize(mp, b2.finish("p", {})).num_layers() == 2);
}

TEST_CASE("eval_forward matches the oracle and is pure across batch rows") {
  Model m = parse_model_or_throw(kAlarmParametric);
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  ParameterStore params(m, 7);
  Layerization plan = layerize(m, c);
  Batch batch = alarm_batch(m, 3);
  Eigen::MatrixXd out = eval_forward(m, c, plan, params, batch);
  REQUIRE(out.rows() == 3);
  CHECK(out(0, 0) == out(1, 0));
  CHECK(out(1, 0) == out(2, 0));

  StoreResolver leaves(params);
  Interpretation empty;
  VariableAssignment sigma{{"V", m.constant_index.at("t1")}, {"S", m.constant_index.at("t2")}};
  double oracle_value = evaluate(m, m.formula("alarm_query").body, sigma, empty, leaves).value.a;
  CHECK(out(0, 0) == doctest::Approx(oracle_value).epsilon(1e-9));

  // one-row evals are bit-identical to the batched run
  Batch single = alarm_batch(m, 1);
  CHECK(eval_forward(m, c, plan, params, single)(0, 0) == out(0, 0));
  // the naive recursive engine agrees bit for bit
  CHECK(eval_naive(m, c, params, batch)(2, 0) == out(2, 0));
}

TEST_CASE("alarm gradient matches the analytic derivative") {
  // d/d(nn_b) [nn_b + (1-nn_b) nn_e] = 1 - nn_e = 0.99, via central differences
  Model m = alarm_model();
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  Layerization plan = layerize(m, c);
  ParameterStore params(m, 1);
  Batch batch = alarm_batch(m);
  auto eval_at = [&](double p) {
    m.labelling.find(m.predicate_index.at("burglary"), m.structure_id("prob"))->uniform_p = p;
    return eval_forward(m, c, plan, params, batch)(0, 0);
  };
  const double h = 1e-7;
  double fd = (eval_at(0.7 + h) - eval_at(0.7 - h)) / (2 * h);
  CHECK(fd == doctest::Approx(0.99).epsilon(1e-6));
  eval_at(0.7);
}

TEST_CASE("reverse mode agrees with dual numbers and finite differences") {
  Model m = parse_model_or_throw(kAlarmParametric);
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  Layerization plan = layerize(m, c);
  ParameterStore params(m, 21);
  Batch batch = alarm_batch(m);

  EvalWorkspace ws;
  eval_forward(m, c, plan, params, batch, &ws);
  params.zero_grad();
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Ones(1, 1);
  eval_gradient(m, c, plan, params, batch, upstream, ws);

  for (std::size_t i = 0; i < params.num_params(); ++i) {
    double dual = eval_dual_derivative(m, c, params, batch, i)(0, 0);
    CHECK(std::abs(params.grad(i) - dual) < 1e-10);
    double v0 = params.get(i);
    const double h = 1e-6;
    params.set(i, v0 + h);
    double up = eval_forward(m, c, plan, params, batch)(0, 0);
    params.set(i, v0 - h);
    double dn = eval_forward(m, c, plan, params, batch)(0, 0);
    params.set(i, v0);
    double fd = (up - dn) / (2 * h);
    CHECK(params.grad(i) == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("all-constant circuits have zero gradients") {
  Model m = parse_model_or_throw(kAlarmParametric);
  StructId ps = m.structure_id("prob");
  CircuitBuilder b(m);
  b.add_root(b.op(ps, OpCode::Mul,
                  {b.constant(ps, Value::real(0.25)), b.constant(ps, Value::real(4.0))}));
  Circuit c = b.finish("const", {});
  Layerization plan = layerize(m, c);
  ParameterStore params(m, 3);
  EvalWorkspace ws;
  eval_forward(m, c, plan, params, Batch::single(), &ws);
  params.zero_grad();
  eval_gradient(m, c, plan, params, Batch::single(), Eigen::MatrixXd::Ones(1, 1), ws);
  for (std::size_t i = 0; i < params.num_params(); ++i) CHECK(params.grad(i) == 0.0);
}

TEST_CASE("gradients over a Boolean structure are rejected") {
  Model m = alarm_model();
  StructId bs = m.structure_id("bool");
  CircuitBuilder b(m);
  Atom batom;
  batom.pred = m.predicate_index.at("burglary");
  b.add_root(b.constant(bs, Value::boolean(true)));
  Circuit c = b.finish("boolc", {});
  Layerization plan = layerize(m, c);
  ParameterStore params(m, 1);
  EvalWorkspace ws;
  eval_forward(m, c, plan, params, Batch::single(), &ws);
  CHECK_THROWS_WITH_AS(
      eval_gradient(m, c, plan, params, Batch::single(), Eigen::MatrixXd::Ones(1, 1), ws),
      doctest::Contains("Boolean"), Error);
}

TEST_CASE("fuzzy kernels and their subgradients") {
  const char* text = R"(
structure {S}.
domain d = {x}.
pred a(d).
pred b(d).
truth fuzzy.
label a @ {S} : categorical().
label b @ {S} : categorical().
formula f(X:d) := and<{S}>(a(X)@{S}, b(X)@{S}).
formula g(X:d) := or<{S}>(a(X)@{S}, b(X)@{S}).
)";
  for (std::string s : {"fuzzy:godel", "fuzzy:lukasiewicz", "fuzzy:product"}) {
    std::string t = text;
    std::string::size_type pos;
    while ((pos = t.find("{S}")) != std::string::npos) t.replace(pos, 3, s);
    Model m = parse_model_or_throw(t);
    for (const char* fname : {"f", "g"}) {
      Circuit c = compile_fuzzy(m, m.formula(fname));
      Layerization plan = layerize(m, c);
      ParameterStore params(m, 77);
      Batch batch;
      batch.rows = 1;
      batch.slots.resize(1);
      batch.slots[0].constants = std::vector<ConstId>{m.constant_index.at("x")};
      EvalWorkspace ws;
      eval_forward(m, c, plan, params, batch, &ws);
      params.zero_grad();
      eval_gradient(m, c, plan, params, batch, Eigen::MatrixXd::Ones(1, 1), ws);
      for (std::size_t i = 0; i < params.num_params(); ++i) {
        double dual = eval_dual_derivative(m, c, params, batch, i)(0, 0);
        CAPTURE(s);
        CAPTURE(fname);
        CAPTURE(i);
        CHECK(std::abs(params.grad(i) - dual) < 1e-10);
      }
    }
  }
}

TEST_CASE("expected fuzzy evaluation: dirac reduces to forward, uniform averages to a half") {
  Model m = parse_model_or_throw(R"(
structure fuzzy:product.
domain d = {x}.
pred a(d).
truth fuzzy.
label a @ fuzzy:product : categorical().
formula f(X:d) := a(X)@fuzzy:product.
)");
  Circuit c = compile_fuzzy(m, m.formula("f"));
  Layerization plan = layerize(m, c);
  ParameterStore params(m, 5);
  Batch batch;
  batch.rows = 1;
  batch.slots.resize(1);
  batch.slots[0].constants = std::vector<ConstId>{m.constant_index.at("x")};

  ExpectedFuzzyConfig dirac;
  Eigen::MatrixXd direct = eval_forward(m, c, plan, params, batch);
  Eigen::MatrixXd expect = eval_expected_fuzzy(m, c, plan, params, batch, dirac);
  CHECK(expect(0, 0) == direct(0, 0));

  ExpectedFuzzyConfig uniform{LeafDist::Uniform, 0.0, 100000, 17};
  double mean = eval_expected_fuzzy(m, c, plan, params, batch, uniform)(0, 0);
  CHECK(std::abs(mean - 0.5) < 0.01);

  ExpectedFuzzyConfig bad{LeafDist::Dirac, 0.0, 0, 0};
  CHECK_THROWS_AS(eval_expected_fuzzy(m, c, plan, params, batch, bad), Error);

  // degenerate distribution at 1.0 on a conjunction evaluates to 1.0
  Model m2 = parse_model_or_throw(R"(
structure fuzzy:product.
domain d = {x}.
pred a(d).
pred b(d).
truth fuzzy.
label a @ fuzzy:product : table(1.0).
label b @ fuzzy:product : table(1.0).
formula f(X:d) := and<fuzzy:product>(a(X)@fuzzy:product, b(X)@fuzzy:product).
)");
  Circuit c2 = compile_fuzzy(m2, m2.formula("f"));
  Layerization plan2 = layerize(m2, c2);
  ParameterStore p2(m2, 1);
  Batch b2;
  b2.rows = 1;
  b2.slots.resize(1);
  b2.slots[0].constants = std::vector<ConstId>{m2.constant_index.at("x")};
  CHECK(eval_expected_fuzzy(m2, c2, plan2, p2, b2, dirac)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("serialization round-trips and flags corruption") {
  Model m = alarm_model();
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  std::ostringstream os;
  serialize(c, os);
  std::istringstream is(os.str());
  Circuit c2 = deserialize(is);
  CHECK(c2.name == c.name);
  REQUIRE(c2.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c2.nodes[i].kind == c.nodes[i].kind);
    CHECK(c2.nodes[i].a == c.nodes[i].a);
  }
  CHECK(c2.leaves == c.leaves);
  CHECK(c2.roots == c.roots);

  // identical evaluation after the round trip
  ParameterStore params(m, 1);
  Batch batch = alarm_batch(m);
  double v1 = eval_forward(m, c, layerize(m, c), params, batch)(0, 0);
  double v2 = eval_forward(m, c2, layerize(m, c2), params, batch)(0, 0);
  CHECK(v1 == v2);

  // truncation is a corrupt-index error
  std::string data = os.str();
  std::istringstream trunc(data.substr(0, data.size() / 2));
  CHECK_THROWS_WITH_AS(deserialize(trunc), doctest::Contains("corrupt index"), Error);

  // empty circuit round-trips and evaluates to an empty matrix
  CircuitBuilder be(m);
  Circuit empty = be.finish("empty", {});
  std::ostringstream os2;
  serialize(empty, os2);
  std::istringstream is2(os2.str());
  Circuit e2 = deserialize(is2);
  CHECK(e2.size() == 0);
  Eigen::MatrixXd out = eval_forward(m, e2, layerize(m, e2), params, Batch::single());
  CHECK(out.cols() == 0);
}

TEST_CASE("every valid layerization yields bit-identical results") {
  Model m = parse_model_or_throw(kAlarmParametric);
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  ParameterStore params(m, 9);
  Batch batch = alarm_batch(m, 2);
  Layerization by_depth = layerize(m, c);

  // alternative plan: one node per layer in topological order
  Layerization serial = by_depth;
  serial.layers.clear();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    if (n.kind == CircuitNode::Kind::Leaf || n.kind == CircuitNode::Kind::Const) continue;
    OpGroup g;
    g.kind = n.kind;
    g.skind = structure_by_name(c.structures.at(n.sid)).kind;
    g.op = n.op;
    g.transform = n.kind == CircuitNode::Kind::Transform ? n.b : -1;
    g.members = {static_cast<std::int32_t>(i)};
    serial.layers.push_back({g});
  }
  Eigen::MatrixXd a = eval_forward(m, c, by_depth, params, batch);
  Eigen::MatrixXd b = eval_forward(m, c, serial, params, batch);
  CHECK(a(0, 0) == b(0, 0));
  CHECK(a(1, 0) == b(1, 0));
}

TEST_CASE("normalization: constant-true logic compiles to the unit circuit") {
  Model m = parse_model_or_throw(kAlarmParametric);
  StructId bs = m.structure_id("bool");
  StructId ps = m.structure_id("prob");
  int iv = m.transformation_index.at("iverson");
  Atom b;
  b.pred = m.predicate_index.at("burglary");
  b.args = {Term::make_var("V")};
  Atom e;
  e.pred = m.predicate_index.at("earthquake");
  e.args = {Term::make_var("S")};
  FormulaPtr body = f_binary(
      ps, "mul",
      f_binary(ps, "mul", f_transform(ps, iv, f_const(bs, Value::boolean(true))),
               f_atom(ps, b)),
      f_atom(ps, e));
  body = f_agg_atom(ps, e, "sum", body);
  body = f_agg_atom(ps, b, "sum", body);
  NamedFormula nf{"unit",
                  {{"V", m.domain_index.at("video")}, {"S", m.domain_index.at("seismic")}},
                  body};
  Circuit c = resolve_aggregations(m, nf);
  Layerization plan = layerize(m, c);
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    ParameterStore params(m, rep);
    for (std::size_t i = 0; i < params.num_params(); ++i) params.set(i, noise(rng));
    double v = eval_forward(m, c, plan, params, alarm_batch(m))(0, 0);
    CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  }
}
