#include <cmath>

#include "deeplog/compiler.hpp"
#include "deeplog/oracle.hpp"
#include "deeplog/program.hpp"
#include "doctest.h"
#include "support/datalog.hpp"
#include "support/fixtures.hpp"

using namespace deeplog;
using namespace deeplog::testing;

namespace {

const char* kOriginalAddition = R"(
domain img = {img0, img1, img2, img3}.
domain digit = {0..9}.
pred classify(img, digit).

nn(classifier, I) :: classify(I, N).
digit(I, N) :- between(0, 9, N), classify(I, N).

number([], 0).
number([H | T], N) :- digit(H, N1), number(T, N2), length(T, L), is(N, (10 ** L) * N1 + N2).

addition(L1, L2, S) :- number(L1, N1), number(L2, N2), is(S, N1 + N2).
)";

const char* kCarryAddition = R"(
domain img = {img0, img1, img2, img3}.
domain digit = {0..9}.
pred classify(img, digit).

nn(classifier, I) :: classify(I, N).
digit(I, N) :- between(0, 9, N), classify(I, N).

addMod10(I1, I2, C, N) :- between(0, 1, C), digit(I1, N1), digit(I2, N2),
                          is(N, (N1 + N2 + C) mod 10).
addDiv10(I1, I2, Cin, Cout) :- between(0, 1, Cin), digit(I1, N1), digit(I2, N2),
                               is(Cout, (N1 + N2 + Cin) div 10).

carry([], [], 0).
carry([H1 | T1], [H2 | T2], Cout) :- carry(T1, T2, Cin), addDiv10(H1, H2, Cin, Cout).

addition([], [], 0).
addition([H1 | T1], [H2 | T2], N) :- carry(T1, T2, Cin), addMod10(H1, H2, Cin, N).
)";

// the grounding-vs-proving example: two fixed images, sums as facts
std::string grounding_program() {
  std::string text = R"(
domain img = {i1, i2}.
domain digit = {0..9}.
domain total = {0..18}.
pred digit(img, digit).
pred sums(digit, digit, total).
pred addition(img, img, total).

nn(classifier, I) :: digit(I, N).
addition(i1, i2, S) :- digit(i1, D1), digit(i2, D2), sums(D1, D2, S).
)";
  for (int a = 0; a <= 9; ++a)
    for (int b = 0; b <= 9; ++b)
      text += "sums(" + std::to_string(a) + ", " + std::to_string(b) + ", " +
              std::to_string(a + b) + ").\n";
  return text;
}

const char* kAlarmProgram = R"(
pred burglary.
pred earthquake.

0.7 :: burglary.
0.01 :: earthquake.

alarm :- burglary.
alarm :- earthquake.
)";

}  // namespace

TEST_CASE("parse_program reads the addition encodings") {
  Program original = parse_program(kOriginalAddition);
  std::set<std::string> preds;
  for (const auto& c : original.clauses) preds.insert(c.head.pred);
  CHECK(preds == std::set<std::string>{"classify", "digit", "number", "addition"});
  CHECK(original.annotated("classify"));
  CHECK_FALSE(original.annotated("number"));

  Program carry = parse_program(kCarryAddition);
  std::set<std::string> cpreds;
  for (const auto& c : carry.clauses) cpreds.insert(c.head.pred);
  CHECK(cpreds.count("addMod10") == 1);
  CHECK(cpreds.count("carry") == 1);

  Program annotated = parse_program("pred burglary.\n0.7 :: burglary.\n");
  REQUIRE(annotated.clauses.size() == 1);
  CHECK(annotated.clauses[0].annotation.has_value());
  CHECK(annotated.clauses[0].annotation->probability == doctest::Approx(0.7));
}

TEST_CASE("range restriction and duplicate annotations are static errors") {
  CHECK_THROWS_WITH_AS(parse_program("p(X) :- q.\n"), doctest::Contains("range-restricted"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_program("pred b.\n0.7 :: b.\n0.2 :: b.\n"),
                       doctest::Contains("duplicate annotation"), Error);
}

TEST_CASE("ground_program reproduces the 1900-instance full grounding") {
  Program p = parse_program(grounding_program());
  auto ground = ground_program(p);
  std::size_t addition_instances = 0;
  for (const auto& c : ground) addition_instances += c.head.pred == "addition";
  CHECK(addition_instances == 1900);  // 10 x 10 x 19

  // a program without variables grounds to itself
  Program flat = parse_program("pred b.\n0.7 :: b.\nq :- b.\n");
  CHECK(ground_program(flat).size() == 2);

  // a rule whose built-in never succeeds vanishes
  Program never = parse_program(R"(
domain d = {0..9}.
pred q(d).
pred b(d).
0.5 :: b(X).
q(N) :- b(N), between(5, 3, N).
)");
  std::size_t q_instances = 0;
  for (const auto& c : ground_program(never)) q_instances += c.head.pred == "q";
  CHECK(q_instances == 0);
}

TEST_CASE("theorem proving instantiates only the relevant proofs") {
  Program p = parse_program(kOriginalAddition);
  auto list1 = [](const char* img) {
    return PTerm::cons(PTerm::sym(img), PTerm::nil());
  };
  PLiteral q0{"addition", {list1("img0"), list1("img2"), PTerm::integer(0)}, false};
  CHECK(prove(p, {q0}).proofs.size() == 1);
  PLiteral q4{"addition", {list1("img0"), list1("img2"), PTerm::integer(4)}, false};
  auto r4 = prove(p, {q4});
  CHECK(r4.proofs.size() == 5);
  for (const auto& proof : r4.proofs) CHECK(proof.size() == 2);

  PLiteral q19{"addition", {list1("img0"), list1("img2"), PTerm::integer(19)}, false};
  CHECK(prove(p, {q19}).proofs.empty());
  Frontend fe = make_frontend(p);
  FormulaPtr none = prove_formula(fe, {q19});
  CHECK(none->kind == Formula::Kind::Const);
  CHECK_FALSE(none->constant.truthy());
}

TEST_CASE("alarm program compiles to the worked formula and value") {
  Program p = parse_program(kAlarmProgram);
  Frontend fe = make_frontend(p);
  auto answers = to_deeplog(fe, parse_query("alarm"));
  REQUIRE(answers.size() == 1);
  CHECK(answers[0].proof_count == 2);

  Interpretation empty;
  auto r = evaluate(fe.model, answers[0].formula.body, {}, empty);
  CHECK(r.value.a == doctest::Approx(0.703).epsilon(1e-12));

  Circuit c = resolve_aggregations(fe.model, answers[0].formula);
  ParameterStore params(fe.model, 1);
  Layerization plan = layerize(fe.model, c);
  CHECK(eval_forward(fe.model, c, plan, params, Batch::single())(0, 0) ==
        doctest::Approx(0.703).epsilon(1e-12));
}

TEST_CASE("negation is allowed on annotated base facts only") {
  Program p = parse_program(R"(
pred rain.
0.3 :: rain.
umbrella :- not(rain).
)");
  Frontend fe = make_frontend(p);
  auto answers = to_deeplog(fe, parse_query("umbrella"));
  REQUIRE(answers.size() == 1);
  Interpretation empty;
  CHECK(evaluate(fe.model, answers[0].formula.body, {}, empty).value.a ==
        doctest::Approx(0.7).epsilon(1e-12));

  Program bad = parse_program(R"(
pred rain.
0.3 :: rain.
wet :- rain.
dry :- not(wet).
)");
  CHECK_THROWS_WITH_AS(prove(bad, {parse_query("dry")}),
                       doctest::Contains("annotated base facts"), Error);
}

TEST_CASE("unbounded recursion hits the resolution depth limit") {
  Program p = parse_program("loop :- loop.\n");
  ProveOptions opts;
  opts.max_depth = 100;
  CHECK_THROWS_WITH_AS(prove(p, {parse_query("loop")}, opts),
                       doctest::Contains("depth limit"), Error);
}

TEST_CASE("encoding sizes: 199 vs 22 ground query atoms for 2-digit addition") {
  auto two = [](const char* a, const char* b) {
    return PTerm::cons(PTerm::sym(a), PTerm::cons(PTerm::sym(b), PTerm::nil()));
  };
  auto one = [](const char* a) { return PTerm::cons(PTerm::sym(a), PTerm::nil()); };

  Program original = parse_program(kOriginalAddition);
  Frontend fe_orig = make_frontend(original);
  PLiteral qo{"addition", {two("img0", "img1"), two("img2", "img3"), PTerm::var("S")}, false};
  auto original_answers = to_deeplog(fe_orig, qo);
  CHECK(original_answers.size() == 199);

  Program carry = parse_program(kCarryAddition);
  Frontend fe_carry = make_frontend(carry);
  PLiteral qc{"carry", {two("img0", "img1"), two("img2", "img3"), PTerm::var("C")}, false};
  PLiteral qd1{"addition", {two("img0", "img1"), two("img2", "img3"), PTerm::var("N")}, false};
  PLiteral qd0{"addition", {one("img1"), one("img3"), PTerm::var("M")}, false};
  std::size_t total = 0;
  total += to_deeplog(fe_carry, qc).size();   // carry-out: 2
  total += to_deeplog(fe_carry, qd1).size();  // top sum digit: 10
  total += to_deeplog(fe_carry, qd0).size();  // low sum digit: 10
  CHECK(total == 22);
}

TEST_CASE("proof enumeration matches an independent bottom-up fixpoint") {
  // four classes keep the subset space at 2^8
  std::string text = R"(
domain img = {i1, i2}.
domain digit = {0..3}.
pred classify(img, digit).

nn(classifier, I) :: classify(I, N).
digit(I, N) :- between(0, 3, N), classify(I, N).

addition(L1, L2, S) :- digit(L1, N1), digit(L2, N2), is(S, N1 + N2).
)";
  Program p = parse_program(text);
  Frontend fe = make_frontend(p);
  PLiteral query{"addition", {PTerm::sym("i1"), PTerm::sym("i2"), PTerm::integer(3)}, false};
  FormulaPtr formula = prove_formula(fe, {query});
  auto atoms = collect_ground_atoms(fe.model, formula);
  REQUIRE(atoms.size() == 8);

  auto models = enumerate_models(fe.model, formula, atoms);
  std::set<std::string> model_keys;
  for (const auto& interp : models) {
    std::string key;
    for (const auto& a : atoms) key += interp.at(a).truthy() ? '1' : '0';
    model_keys.insert(key);
  }

  // exactly-one-consistent subsets: one class per image
  std::size_t checked = 0;
  for (int c1 = 0; c1 < 4; ++c1) {
    for (int c2 = 0; c2 < 4; ++c2) {
      std::vector<std::pair<std::string, std::vector<PTerm>>> facts;
      facts.push_back({"classify", {PTerm::sym("i1"), PTerm::integer(c1)}});
      facts.push_back({"classify", {PTerm::sym("i2"), PTerm::integer(c2)}});
      bool entailed = bottom_up_entails(p, facts, query);
      std::string key;
      for (const auto& a : atoms) {
        const auto& sym = fe.model.const_name(a.args[1]);
        int cls = std::stoi(sym);
        bool i1 = fe.model.const_name(a.args[0]) == "i1";
        key += ((i1 && cls == c1) || (!i1 && cls == c2)) ? '1' : '0';
      }
      CAPTURE(c1);
      CAPTURE(c2);
      CHECK(model_keys.count(key) == (entailed ? 1u : 0u));
      ++checked;
    }
  }
  CHECK(checked == 16);

  // mutual exclusivity: no model sets two classes of one image true
  for (const auto& interp : models) {
    int i1_true = 0, i2_true = 0;
    for (const auto& a : atoms) {
      if (!interp.at(a).truthy()) continue;
      (fe.model.const_name(a.args[0]) == "i1" ? i1_true : i2_true) += 1;
    }
    CHECK(i1_true <= 1);
    CHECK(i2_true <= 1);
  }
}

TEST_CASE("grounding and theorem proving agree on query probabilities") {
  // small domains keep brute force tractable: 2 images, 3 classes
  std::string text = R"(
domain img = {i1, i2}.
domain digit = {0..2}.
pred classify(img, digit).

nn(classifier, I) :: classify(I, N).
digit(I, N) :- between(0, 2, N), classify(I, N).

addition(L1, L2, S) :- digit(L1, N1), digit(L2, N2), is(S, N1 + N2).
)";
  Program p = parse_program(text);
  Frontend fe = make_frontend(p);
  ParameterStore params(fe.model, 19);
  StoreResolver leaves(params);
  double total = 0.0;
  for (int s = 0; s <= 4; ++s) {
    PLiteral q{"addition", {PTerm::sym("i1"), PTerm::sym("i2"), PTerm::integer(s)}, false};
    AnswerFormula af = to_deeplog_conjunction(fe, {q}, "sum" + std::to_string(s));
    // oracle over the emitted formula
    Interpretation empty;
    double via_formula = evaluate(fe.model, af.formula.body, {}, empty, leaves).value.a;
    // brute-force WMC over the same logic with the same weights
    FormulaPtr logic = prove_formula(fe, {q});
    WeightFn weights = [&](const GroundAtom& a, bool truth) {
      return leaves.label(fe.model, a, fe.model.structure_id("prob"), Value::boolean(truth)).a;
    };
    double via_wmc = brute_force_wmc(fe.model, logic, weights);
    CHECK(via_formula == doctest::Approx(via_wmc).epsilon(1e-9));
    total += via_formula;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}
