#include "deeplog/tasks.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <functional>
#include <numeric>
#include <sstream>

#include "deeplog/bench.hpp"
#include "deeplog/compiler.hpp"
#include "deeplog/parser.hpp"

namespace deeplog {

// ---------------------------------------------------------------------------
// Programs

std::string addition_program(int digits, const std::string& encoding) {
  if (digits < 1) fail("addition needs at least one digit");
  std::string text = "domain img = {";
  for (int i = 0; i < 2 * digits; ++i) text += (i ? ", img" : "img") + std::to_string(i);
  text += "}.\ndomain digit = {0..9}.\npred classify(img, digit).\n\n";
  text += "nn(classifier, I) :: classify(I, N).\n";
  text += "digit(I, N) :- between(0, 9, N), classify(I, N).\n\n";
  if (encoding == "original") {
    text += "number([], 0).\n";
    text += "number([H | T], N) :- digit(H, N1), number(T, N2), length(T, L), "
            "is(N, (10 ** L) * N1 + N2).\n\n";
    text += "addition(L1, L2, S) :- number(L1, N1), number(L2, N2), is(S, N1 + N2).\n";
  } else if (encoding == "carry") {
    text += "addMod10(I1, I2, C, N) :- between(0, 1, C), digit(I1, N1), digit(I2, N2), "
            "is(N, (N1 + N2 + C) mod 10).\n";
    text += "addDiv10(I1, I2, Cin, Cout) :- between(0, 1, Cin), digit(I1, N1), digit(I2, N2), "
            "is(Cout, (N1 + N2 + Cin) div 10).\n\n";
    text += "carry([], [], 0).\n";
    text += "carry([H1 | T1], [H2 | T2], Cout) :- carry(T1, T2, Cin), "
            "addDiv10(H1, H2, Cin, Cout).\n\n";
    text += "addition([], [], 0).\n";
    text += "addition([H1 | T1], [H2 | T2], N) :- carry(T1, T2, Cin), "
            "addMod10(H1, H2, Cin, N).\n";
  } else {
    fail("unknown addition encoding '" + encoding + "'");
  }
  return text;
}

namespace {

const char* structure_name(Semantics semantics, TNorm tnorm) {
  if (semantics == Semantics::Probabilistic) return "prob";
  switch (tnorm) {
    case TNorm::Godel: return "fuzzy:godel";
    case TNorm::Lukasiewicz: return "fuzzy:lukasiewicz";
    case TNorm::Product: return "fuzzy:product";
  }
  return "prob";
}

// Switch the labelling of `pred` to a perceptual producer; for fuzzy
// semantics the entry moves to the fuzzy structure.
std::int32_t attach_perception(Model& m, const std::string& pred, StructId sid, int dim,
                               int hidden, int class_arg) {
  PredId p = m.predicate_index.at(pred);
  LabelEntry* e = m.labelling.find(p, sid);
  if (!e) {
    LabelEntry fresh;
    fresh.pred = p;
    fresh.sid = sid;
    m.labelling.entries.push_back(fresh);
    e = &m.labelling.entries.back();
  }
  e->kind = LabelKind::Perceptual;
  e->input_dim = dim;
  e->hidden = hidden;
  e->class_arg = class_arg;
  return static_cast<std::int32_t>(e - m.labelling.entries.data());
}

PTerm img_list(int from, int count) {
  PTerm t = PTerm::nil();
  for (int i = from + count - 1; i >= from; --i)
    t = PTerm::cons(PTerm::sym("img" + std::to_string(i)), t);
  return t;
}

ToDeepLogOptions lift_images(int count) {
  ToDeepLogOptions opt;
  for (int i = 0; i < count; ++i)
    opt.lift.emplace_back("img" + std::to_string(i), "I" + std::to_string(i));
  return opt;
}

// fuzzy relaxation of a proof set: or over proofs of and over leaf scores
NamedFormula fuzzy_answer(Model& m, StructId fz, const ProveResult& r,
                          const std::vector<std::int32_t>& proof_ids, const std::string& name,
                          const ToDeepLogOptions& lift) {
  std::map<std::string, std::string> lifted(lift.lift.begin(), lift.lift.end());
  auto atom_of = [&](const ProofLiteral& leaf) {
    Atom a;
    a.pred = m.predicate_index.at(leaf.pred);
    for (const auto& t : leaf.args) {
      std::string symbol = t.kind == PTerm::Kind::Int ? std::to_string(t.num) : t.name;
      auto lifted_it = lifted.find(symbol);
      if (lifted_it != lifted.end()) {
        a.args.push_back(Term::make_var(lifted_it->second));
      } else {
        auto c = m.constant_index.find(symbol);
        if (c == m.constant_index.end()) fail("constant outside domain: " + symbol);
        a.args.push_back(Term::make_const(c->second));
      }
    }
    return a;
  };
  FormulaPtr dnf;
  for (std::int32_t pid : proof_ids) {
    FormulaPtr conj;
    for (std::int32_t lid : r.proofs[pid]) {
      const ProofLiteral& leaf = r.literals[lid];
      FormulaPtr lit = f_atom(fz, atom_of(leaf));
      if (!leaf.positive) lit = f_unary(fz, "not", lit);
      conj = conj ? f_binary(fz, "and", conj, lit) : lit;
    }
    if (!conj) conj = f_const(fz, Value::fuzzy(1.0));
    dnf = dnf ? f_binary(fz, "or", dnf, conj) : conj;
  }
  if (!dnf) dnf = f_const(fz, Value::fuzzy(0.0));
  NamedFormula nf;
  nf.name = name;
  nf.body = dnf;
  for (const auto& [symbol, var] : lift.lift) {
    ConstId c = m.constant_index.at(symbol);
    for (std::size_t d = 0; d < m.domains.size(); ++d) {
      const auto& members = m.domains[d].members;
      if (std::find(members.begin(), members.end(), c) != members.end()) {
        nf.params.emplace_back(var, static_cast<DomainId>(d));
        break;
      }
    }
  }
  return nf;
}

struct QuerySet {
  std::vector<PLiteral> queries;
  std::vector<std::vector<long long>> answers;       // per query
  std::vector<std::vector<Circuit>> answer_circuits;  // per query, per answer
};

QuerySet compile_queries(Frontend& fe, const std::vector<PLiteral>& queries, Semantics semantics,
                         TNorm tnorm, const ToDeepLogOptions& lift) {
  QuerySet out;
  out.queries = queries;
  StructId fz = -1;
  if (semantics != Semantics::Probabilistic)
    fz = fe.model.structure_id(structure_name(semantics, tnorm));
  for (const PLiteral& q : queries) {
    GroupedProofs grouped = prove_grouped(fe, {q});
    const auto& groups = grouped.groups;
    std::vector<long long> answers(groups.size());
    std::vector<Circuit> circuits(groups.size());
    parallel_for(groups.size(), [&](std::size_t i) {
      const PTerm& last = groups[i].answer_args.back();
      answers[i] = last.kind == PTerm::Kind::Int ? last.num : -1;
      if (semantics == Semantics::Probabilistic) {
        NamedFormula nf =
            wrap_answer(fe, grouped.result, groups[i].proof_ids, groups[i].answer, lift);
        circuits[i] = resolve_aggregations(fe.model, nf);
      } else {
        NamedFormula nf = fuzzy_answer(fe.model, fz, grouped.result, groups[i].proof_ids,
                                       groups[i].answer, lift);
        circuits[i] = compile_fuzzy(fe.model, nf);
      }
    });
    out.answers.push_back(std::move(answers));
    out.answer_circuits.push_back(std::move(circuits));
  }
  return out;
}

}  // namespace

AdditionTask build_addition_task(int digits, const std::string& encoding, Semantics semantics,
                                 TNorm tnorm, int hidden) {
  Program p = parse_program(addition_program(digits, encoding));
  AdditionTask task{make_frontend(p), {}, {}, {}};
  Model& m = task.frontend.model;
  if (semantics == Semantics::Probabilistic) {
    attach_perception(m, "classify", m.structure_id("prob"), 10, hidden, 1);
  } else {
    StructId fz = m.add_structure(structure_name(semantics, tnorm));
    attach_perception(m, "classify", fz, 10, hidden, 1);
  }
  ToDeepLogOptions lift = lift_images(2 * digits);

  std::vector<PLiteral> queries;
  if (encoding == "original") {
    queries.push_back(
        {"addition", {img_list(0, digits), img_list(digits, digits), PTerm::var("S")}, false});
  } else {
    queries.push_back(
        {"addition", {img_list(0, digits), img_list(digits, digits), PTerm::var("S")}, false});
  }
  QuerySet qs = compile_queries(task.frontend, queries, semantics, tnorm, lift);
  task.answers = qs.answers[0];
  for (const auto& per_query : qs.answer_circuits)
    task.ground_query_atoms.push_back(per_query.size());
  task.circuit = merge_circuits(m, qs.answer_circuits[0],
                                encoding + std::to_string(digits) + "-answers");
  return task;
}

CarryHeads build_carry_heads(int digits, Semantics semantics, TNorm tnorm, int hidden) {
  Program p = parse_program(addition_program(digits, "carry"));
  CarryHeads heads{make_frontend(p), {}, {}};
  Model& m = heads.frontend.model;
  if (semantics == Semantics::Probabilistic) {
    attach_perception(m, "classify", m.structure_id("prob"), 10, hidden, 1);
  } else {
    StructId fz = m.add_structure(structure_name(semantics, tnorm));
    attach_perception(m, "classify", fz, 10, hidden, 1);
  }
  ToDeepLogOptions lift = lift_images(2 * digits);

  std::vector<PLiteral> queries;
  queries.push_back(
      {"carry", {img_list(0, digits), img_list(digits, digits), PTerm::var("C")}, false});
  for (int i = 0; i < digits; ++i)
    queries.push_back({"addition",
                       {img_list(i, digits - i), img_list(digits + i, digits - i),
                        PTerm::var("N")},
                       false});
  QuerySet qs = compile_queries(heads.frontend, queries, semantics, tnorm, lift);
  heads.answers = qs.answers;
  for (std::size_t i = 0; i < qs.answer_circuits.size(); ++i)
    heads.circuits.push_back(merge_circuits(m, qs.answer_circuits[i],
                                            "carry-head" + std::to_string(i)));
  return heads;
}

Circuit build_carry_joint_circuit(Frontend& fe, int digits,
                                  const std::vector<long long>& sums) {
  ToDeepLogOptions lift = lift_images(2 * digits);
  std::vector<std::string> slot_names;
  for (const auto& [c, v] : lift.lift) slot_names.push_back(v);
  long long pow10 = 1;
  for (int i = 0; i < digits; ++i) pow10 *= 10;

  // one proof pass with free per-position answers; proofs grouped by the
  // full sum they decompose into
  std::vector<PLiteral> goals;
  goals.push_back(
      {"carry", {img_list(0, digits), img_list(digits, digits), PTerm::var("C")}, false});
  for (int i = 0; i < digits; ++i)
    goals.push_back({"addition",
                     {img_list(i, digits - i), img_list(digits + i, digits - i),
                      PTerm::var("D" + std::to_string(i))},
                     false});
  GroupedProofs grouped = prove_grouped(fe, goals);

  std::map<long long, std::vector<std::int32_t>> by_sum;
  for (const AnswerGroup& group : grouped.groups) {
    // answer args are the flattened goal arguments; the carry-out sits at
    // index 2, the digit of goal k at index 3k + 2
    long long total = group.answer_args.at(2).num * pow10;
    long long div = pow10 / 10;
    for (int i = 0; i < digits; ++i) {
      total += group.answer_args.at(3 * (i + 1) + 2).num * div;
      div /= 10;
    }
    auto& ids = by_sum[total];
    ids.insert(ids.end(), group.proof_ids.begin(), group.proof_ids.end());
  }

  std::vector<Circuit> circuits(sums.size());
  parallel_for(sums.size(), [&](std::size_t i) {
    auto it = by_sum.find(sums[i]);
    NamedFormula nf;
    if (it == by_sum.end()) {
      AnswerFormula af;
      Circuit empty;
      // unprovable sum: constant zero
      CircuitBuilder b(fe.model);
      b.add_root(b.constant(fe.model.structure_id("prob"), Value::real(0.0)));
      circuits[i] = b.finish("sum" + std::to_string(sums[i]), slot_names);
      return;
    }
    nf = wrap_answer(fe, grouped.result, it->second, "sum" + std::to_string(sums[i]), lift);
    circuits[i] = resolve_aggregations(fe.model, nf);
  });
  return merge_circuits(fe.model, circuits, "carry-joint");
}

// ---------------------------------------------------------------------------
// Sudoku

bool sudoku_valid(const std::vector<int>& board) {
  static const int units[12][4] = {
      {0, 1, 2, 3},  {4, 5, 6, 7},  {8, 9, 10, 11}, {12, 13, 14, 15},  // rows
      {0, 4, 8, 12}, {1, 5, 9, 13}, {2, 6, 10, 14}, {3, 7, 11, 15},    // columns
      {0, 1, 4, 5},  {2, 3, 6, 7},  {8, 9, 12, 13}, {10, 11, 14, 15},  // boxes
  };
  for (const auto& unit : units)
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (board[unit[a]] == board[unit[b]]) return false;
  return true;
}

namespace {

Model sudoku_model(Semantics semantics, TNorm tnorm, int hidden) {
  std::string text = "structure prob, bool.\ndomain cellpos = {";
  for (int i = 0; i < 16; ++i) text += (i ? ", p" : "p") + std::to_string(i);
  text += "}.\ndomain val = {1, 2, 3, 4}.\npred cell(cellpos, val).\ntruth bool.\n";
  text += "label cell @ bool : identity.\n";
  text += "label cell @ prob : perceptual(dim=4, class=2).\n";
  Model m = parse_model_or_throw(text);
  m.add_transformation(iverson());
  if (semantics != Semantics::Probabilistic) {
    StructId fz = m.add_structure(structure_name(semantics, tnorm));
    attach_perception(m, "cell", fz, 4, hidden, 1);
  } else if (hidden > 0) {
    attach_perception(m, "cell", m.structure_id("prob"), 4, hidden, 1);
  }
  return m;
}

FormulaPtr sudoku_rules(const Model& m, StructId sid, bool fuzzy) {
  static const int units[12][4] = {
      {0, 1, 2, 3},  {4, 5, 6, 7},  {8, 9, 10, 11}, {12, 13, 14, 15},
      {0, 4, 8, 12}, {1, 5, 9, 13}, {2, 6, 10, 14}, {3, 7, 11, 15},
      {0, 1, 4, 5},  {2, 3, 6, 7},  {8, 9, 12, 13}, {10, 11, 14, 15},
  };
  PredId cell = m.predicate_index.at("cell");
  auto atom = [&](int pos, int v) {
    Atom a;
    a.pred = cell;
    a.args = {Term::make_var("P" + std::to_string(pos)),
              Term::make_const(m.constant_index.at(std::to_string(v)))};
    return a;
  };
  FormulaPtr rules;
  for (const auto& unit : units) {
    for (int v = 1; v <= 4; ++v) {
      for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) {
          FormulaPtr pair = f_unary(
              sid, "not",
              f_binary(sid, "and", f_atom(sid, atom(unit[a], v)),
                       f_atom(sid, atom(unit[b], v))));
          rules = rules ? f_binary(sid, "and", rules, pair) : pair;
        }
      }
    }
  }
  (void)fuzzy;
  return rules;
}

std::vector<std::pair<std::string, DomainId>> sudoku_params(const Model& m) {
  std::vector<std::pair<std::string, DomainId>> params;
  DomainId pos = m.domain_index.at("cellpos");
  for (int i = 0; i < 16; ++i) params.emplace_back("P" + std::to_string(i), pos);
  return params;
}

NamedFormula sudoku_wmc(const Model& m, bool valid) {
  StructId bs = m.structure_id("bool");
  StructId ps = m.structure_id("prob");
  int iv = m.transformation_index.at("iverson");
  PredId cell = m.predicate_index.at("cell");

  std::vector<Atom> aggregated;
  FormulaPtr eo;
  for (int pos = 0; pos < 16; ++pos) {
    std::vector<Atom> members;
    for (int v = 1; v <= 4; ++v) {
      Atom a;
      a.pred = cell;
      a.args = {Term::make_var("P" + std::to_string(pos)),
                Term::make_const(m.constant_index.at(std::to_string(v)))};
      members.push_back(a);
    }
    FormulaPtr group = exactly_one_formula(m, bs, members);
    eo = eo ? f_binary(bs, "and", eo, group) : group;
    for (const Atom& a : members) aggregated.push_back(a);
  }
  FormulaPtr rules = sudoku_rules(m, bs, false);
  if (!valid) rules = f_unary(bs, "not", rules);
  FormulaPtr logic = f_binary(bs, "and", eo, rules);

  FormulaPtr body = f_transform(ps, iv, logic);
  for (const Atom& a : aggregated) body = f_binary(ps, "mul", body, f_atom(ps, a));
  for (auto it = aggregated.rbegin(); it != aggregated.rend(); ++it)
    body = f_agg_atom(ps, *it, "sum", body);

  NamedFormula nf;
  nf.name = valid ? "sudoku_valid" : "sudoku_invalid";
  nf.params = sudoku_params(m);
  nf.body = body;
  return nf;
}

}  // namespace

SudokuTask build_sudoku_task(Semantics semantics, TNorm tnorm, int hidden) {
  SudokuTask task;
  task.model = sudoku_model(semantics, tnorm, hidden);
  Model& m = task.model;
  if (semantics == Semantics::Probabilistic) {
    Circuit invalid = resolve_aggregations(m, sudoku_wmc(m, false));
    Circuit valid = resolve_aggregations(m, sudoku_wmc(m, true));
    task.circuit = merge_circuits(m, {invalid, valid}, "sudoku4");
    task.valid_root = 1;
  } else {
    StructId fz = m.structure_id(structure_name(semantics, tnorm));
    NamedFormula nf;
    nf.name = "sudoku_valid";
    nf.params = sudoku_params(m);
    nf.body = sudoku_rules(m, fz, true);
    Circuit valid = compile_fuzzy(m, nf);
    // prepend the complement root for loss-mode agreement
    CircuitBuilder b(m);
    std::vector<std::int32_t> map(valid.size(), -1);
    std::function<std::int32_t(std::int32_t)> rep = [&](std::int32_t n) -> std::int32_t {
      if (map[n] >= 0) return map[n];
      const CircuitNode& nd = valid.nodes[n];
      std::int32_t out = -1;
      switch (nd.kind) {
        case CircuitNode::Kind::Leaf: {
          const LeafRef& lr = valid.leaves[nd.a];
          out = b.leaf(lr.entry, lr.atom, lr.component);
          break;
        }
        case CircuitNode::Kind::Const: out = b.constant(nd.sid, valid.consts[nd.a]); break;
        case CircuitNode::Kind::Transform: out = b.transform(nd.sid, nd.b, rep(nd.a)); break;
        case CircuitNode::Kind::Op: {
          auto [ks, cnt] = valid.node_kids(n);
          std::vector<std::int32_t> kids;
          for (std::int32_t i = 0; i < cnt; ++i) kids.push_back(rep(ks[i]));
          out = b.op(nd.sid, nd.op, std::move(kids));
          break;
        }
      }
      map[n] = out;
      return out;
    };
    std::int32_t root = rep(valid.roots[0]);
    b.add_root(b.op(fz, OpCode::Not, {root}));
    b.add_root(root);
    task.circuit = b.finish("sudoku4", valid.slots);
    task.valid_root = 1;
  }
  return task;
}

AlarmTask build_alarm_task(int hidden) {
  AlarmTask task;
  task.model = parse_model_or_throw(R"(
structure prob, bool.
domain video = {v0}.
domain seismic = {s0}.
pred burglary(video).
pred earthquake(seismic).
truth bool.
label burglary @ bool : identity.
label earthquake @ bool : identity.
label burglary @ prob : perceptual(dim=2).
label earthquake @ prob : perceptual(dim=2).
formula alarm_query(V:video, S:seismic) :=
    sum<burglary(V)> sum<earthquake(S)>
      transform<prob, iverson>( or<bool>(burglary(V)@bool, earthquake(S)@bool) )
      * ( burglary(V)@prob * earthquake(S)@prob ).
)");
  if (hidden > 0) {
    attach_perception(task.model, "burglary", task.model.structure_id("prob"), 2, hidden, -1);
    attach_perception(task.model, "earthquake", task.model.structure_id("prob"), 2, hidden, -1);
  }
  task.circuit = resolve_aggregations(task.model, task.model.formula("alarm_query"));
  return task;
}

// ---------------------------------------------------------------------------
// Data generators

namespace {

void assign_split(Dataset& d) {
  d.split.resize(d.rows);
  for (int r = 0; r < d.rows; ++r) {
    double frac = static_cast<double>(r) / std::max(1, d.rows);
    d.split[r] = frac < 0.7 ? 0 : (frac < 0.85 ? 1 : 2);
  }
}

Eigen::MatrixXd prototype_payloads(const std::vector<int>& classes, int num_classes,
                                   std::mt19937_64& rng, double noise_sigma = 0.1) {
  std::normal_distribution<double> noise(0.0, noise_sigma);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(classes.size()), num_classes);
  for (std::size_t r = 0; r < classes.size(); ++r) {
    for (int k = 0; k < num_classes; ++k)
      out(static_cast<Eigen::Index>(r), k) = (k == classes[r] ? 1.0 : 0.0) + noise(rng);
  }
  return out;
}

}  // namespace

Dataset make_addition_data(int digits, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 9);
  Dataset d;
  d.rows = count;
  d.slots.resize(2 * digits);
  d.class_targets.resize(count);
  std::vector<std::vector<int>> slot_classes(2 * digits, std::vector<int>(count));
  d.latent_truth.assign(count, std::vector<int>(2 * digits));
  for (int r = 0; r < count; ++r) {
    long long n1 = 0, n2 = 0;
    for (int i = 0; i < digits; ++i) {
      int a = pick(rng), b = pick(rng);
      slot_classes[i][r] = a;
      slot_classes[digits + i][r] = b;
      d.latent_truth[r][i] = a;
      d.latent_truth[r][digits + i] = b;
      n1 = n1 * 10 + a;
      n2 = n2 * 10 + b;
    }
    d.class_targets[r] = static_cast<int>(n1 + n2);
  }
  for (int s = 0; s < 2 * digits; ++s)
    d.slots[s].payloads = prototype_payloads(slot_classes[s], 10, rng);
  assign_split(d);
  return d;
}

Dataset make_sudoku_data(int n, int count, std::uint64_t seed) {
  if (n != 4) fail("only the 4x4 grid is bundled");
  // enumerate every complete valid board once
  static const std::vector<std::vector<int>> solutions = [] {
    std::vector<std::vector<int>> all;
    std::vector<int> board(16, 0);
    std::function<void(int)> rec = [&](int pos) {
      if (pos == 16) {
        all.push_back(board);
        return;
      }
      for (int v = 1; v <= 4; ++v) {
        board[pos] = v;
        bool ok = true;
        static const int units[12][4] = {
            {0, 1, 2, 3},  {4, 5, 6, 7},  {8, 9, 10, 11}, {12, 13, 14, 15},
            {0, 4, 8, 12}, {1, 5, 9, 13}, {2, 6, 10, 14}, {3, 7, 11, 15},
            {0, 1, 4, 5},  {2, 3, 6, 7},  {8, 9, 12, 13}, {10, 11, 14, 15},
        };
        for (const auto& unit : units) {
          int seen[5] = {0, 0, 0, 0, 0};
          for (int c : unit) {
            if (c > pos) continue;
            if (board[c] && seen[board[c]]++) ok = false;
          }
        }
        if (ok) rec(pos + 1);
      }
      board[pos] = 0;
    };
    rec(0);
    return all;
  }();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_solution(0, solutions.size() - 1);
  std::uniform_int_distribution<int> pick_val(1, 4);
  Dataset d;
  d.rows = count;
  d.slots.resize(16);
  d.real_targets.resize(count);
  d.class_targets.resize(count);
  d.latent_truth.assign(count, std::vector<int>(16));
  std::vector<std::vector<int>> slot_classes(16, std::vector<int>(count));
  for (int r = 0; r < count; ++r) {
    std::vector<int> board(16);
    bool want_valid = r % 2 == 0;  // balanced
    if (want_valid) {
      board = solutions[pick_solution(rng)];
    } else {
      do {
        for (int i = 0; i < 16; ++i) board[i] = pick_val(rng);
      } while (sudoku_valid(board));
    }
    d.real_targets[r] = sudoku_valid(board) ? 1.0 : 0.0;
    d.class_targets[r] = static_cast<int>(d.real_targets[r]);
    for (int i = 0; i < 16; ++i) {
      slot_classes[i][r] = board[i] - 1;
      d.latent_truth[r][i] = board[i] - 1;
    }
  }
  for (int s = 0; s < 16; ++s) d.slots[s].payloads = prototype_payloads(slot_classes[s], 4, rng);
  assign_split(d);
  return d;
}

Dataset make_alarm_data(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  Dataset d;
  d.rows = count;
  d.slots.resize(2);
  d.real_targets.resize(count);
  d.latent_truth.assign(count, std::vector<int>(2));
  std::vector<int> b(count), e(count);
  for (int r = 0; r < count; ++r) {
    b[r] = coin(rng);
    e[r] = coin(rng);
    d.latent_truth[r] = {b[r], e[r]};
    d.real_targets[r] = (b[r] || e[r]) ? 1.0 : 0.0;
  }
  d.slots[0].payloads = prototype_payloads(b, 2, rng);
  d.slots[1].payloads = prototype_payloads(e, 2, rng);
  assign_split(d);
  return d;
}

// ---------------------------------------------------------------------------
// Task runner

namespace {

std::string semantics_tag(const TaskSpec& spec) {
  switch (spec.semantics) {
    case Semantics::Probabilistic: return "prob";
    case Semantics::Fuzzy: return structure_name(spec.semantics, spec.tnorm);
    case Semantics::ProbabilisticFuzzy:
      return std::string("probfuzzy:") + (structure_name(spec.semantics, spec.tnorm) + 6);
  }
  return "?";
}

TrainConfig::LossKind derived_loss(const TaskSpec& spec, bool categorical_answers) {
  if (spec.semantics == Semantics::Probabilistic)
    return categorical_answers ? TrainConfig::LossKind::NegativeLogLikelihood
                               : TrainConfig::LossKind::BinaryCrossEntropy;
  return TrainConfig::LossKind::MeanSquaredError;
}

// diagnostic: classifier accuracy against the retained ground truth
double latent_accuracy(const Model& m, std::int32_t entry, const ParameterStore& params,
                       const Dataset& data, const std::vector<int>& rows, int classes,
                       bool best_permutation) {
  const ParamBlock* block = params.block_for_entry(entry);
  if (!block || !block->perceptual) return 0.0;
  const PerceptualParams& pp = *block->perceptual;
  std::vector<std::vector<int>> predicted(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t s = 0; s < data.slots.size(); ++s) {
      Eigen::VectorXd x = data.slots[s].payloads->row(rows[i]).transpose();
      Eigen::VectorXd logits;
      if (pp.w1.size() > 0)
        logits = pp.w2 * ((pp.w1 * x + pp.b1).array().tanh().matrix()) + pp.b2;
      else
        logits = pp.w2 * x + pp.b2;
      Eigen::Index arg = 0;
      logits.maxCoeff(&arg);
      predicted[i].push_back(static_cast<int>(arg));
    }
  }
  auto score = [&](const std::vector<int>& perm) {
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t s = 0; s < predicted[i].size(); ++s) {
        hits += perm[predicted[i][s]] == data.latent_truth[rows[i]][s];
        ++total;
      }
    return static_cast<double>(hits) / static_cast<double>(total);
  };
  std::vector<int> perm(classes);
  std::iota(perm.begin(), perm.end(), 0);
  if (!best_permutation) return score(perm);
  double best = 0.0;
  do {
    best = std::max(best, score(perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double mean_entropy(const Eigen::MatrixXd& scores) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    double z = std::max(scores.row(r).sum(), 1e-12);
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
      double p = std::max(scores(r, c), 1e-15) / z;
      total -= p * std::log(p);
    }
  }
  return scores.rows() ? total / static_cast<double>(scores.rows()) : 0.0;
}

}  // namespace

std::string TaskMetrics::csv_header() {
  return "task,semantics,mode,seed,metric,value,latent_accuracy,prediction_entropy,"
         "train_seconds,epochs";
}

std::string TaskMetrics::csv_row() const {
  std::ostringstream os;
  os << task << "," << semantics << "," << mode << "," << seed << "," << metric << "," << value
     << "," << latent_accuracy << "," << prediction_entropy << "," << train_seconds << ","
     << epochs;
  return os.str();
}

TaskMetrics run_task(const TaskSpec& spec) {
  TaskMetrics out;
  out.task = spec.task + (spec.task == "mnist-add"
                              ? "-" + spec.encoding + "-n" + std::to_string(spec.digits)
                              : "");
  out.semantics = semantics_tag(spec);
  out.mode = spec.mode == TrainConfig::Mode::Architecture ? "architecture" : "loss";
  out.seed = spec.seed;

  TrainConfig config = spec.train;
  config.mode = spec.mode;
  config.seed = spec.seed;
  ExpectedFuzzyConfig sampling;
  sampling.dist = LeafDist::LogitNormal;
  sampling.sigma = spec.sigma;
  sampling.samples = spec.samples;
  sampling.seed = spec.seed;

  auto t0 = std::chrono::steady_clock::now();
  if (spec.task == "mnist-add") {
    Dataset data = make_addition_data(spec.digits, spec.data_rows, spec.seed * 977 + 13);
    AdditionTask task =
        build_addition_task(spec.digits, spec.encoding, spec.semantics, spec.tnorm, spec.hidden);
    Model& m = task.frontend.model;
    config.loss = derived_loss(spec, true);

    std::unique_ptr<Objective> objective;
    std::int32_t classify_entry = -1;
    for (std::size_t i = 0; i < m.labelling.entries.size(); ++i)
      if (m.labelling.entries[i].kind == LabelKind::Perceptual)
        classify_entry = static_cast<std::int32_t>(i);

    if (spec.mode == TrainConfig::Mode::Architecture) {
      objective = std::make_unique<ArchitectureObjective>(m, task.circuit, data, spec.semantics,
                                                          config.loss, sampling);
    } else {
      // direct head over the joined payloads
      DomainId sums = m.add_domain("sums");
      for (const long long s : task.answers)
        m.domains[sums].members.push_back(m.add_constant(std::to_string(s) + "s"));
      PredicateSignature sig;
      sig.name = "answer";
      DomainId img = m.domain_index.at("img");
      for (int i = 0; i < 2 * spec.digits; ++i) sig.domains.push_back(img);
      sig.domains.push_back(sums);
      PredId pred = m.add_predicate(std::move(sig));
      LabelEntry head;
      head.pred = pred;
      head.sid = task.circuit.root_sid();
      head.kind = LabelKind::Perceptual;
      head.input_dim = 20 * spec.digits;
      head.hidden = spec.hidden;
      head.class_arg = 2 * spec.digits;
      m.labelling.entries.push_back(head);
      std::int32_t head_entry = static_cast<std::int32_t>(m.labelling.entries.size()) - 1;
      objective = std::make_unique<LossModeObjective>(m, head_entry, task.circuit, data,
                                                      spec.semantics);
    }
    ParameterStore params(m, spec.seed);
    TrainResult tr = train(*objective, params, data, config);
    out.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.epochs = tr.epochs_run;

    std::vector<int> test = data.rows_of_split(2);
    Eigen::MatrixXd scores = objective->predict(test, params);
    std::vector<int> targets;
    for (int r : test) targets.push_back(data.class_targets[r]);
    out.metric = "accuracy";
    out.value = accuracy(scores, targets);
    out.prediction_entropy = mean_entropy(scores);
    out.latent_accuracy = latent_accuracy(m, classify_entry, params, data, test, 10, false);
    return out;
  }

  if (spec.task == "sudoku4") {
    Dataset data = make_sudoku_data(4, spec.data_rows, spec.seed * 977 + 13);
    SudokuTask task = build_sudoku_task(spec.semantics, spec.tnorm, spec.hidden);
    Model& m = task.model;
    config.loss = derived_loss(spec, false);

    std::unique_ptr<Objective> objective;
    std::int32_t cell_entry = -1;
    for (std::size_t i = 0; i < m.labelling.entries.size(); ++i)
      if (m.labelling.entries[i].kind == LabelKind::Perceptual)
        cell_entry = static_cast<std::int32_t>(i);

    Circuit valid_only = extract_root(m, task.circuit, static_cast<std::size_t>(task.valid_root));

    if (spec.mode == TrainConfig::Mode::Architecture) {
      objective = std::make_unique<ArchitectureObjective>(m, valid_only, data, spec.semantics,
                                                          config.loss, sampling);
    } else {
      DomainId verdict = m.add_domain("verdict");
      m.domains[verdict].members.push_back(m.add_constant("no"));
      m.domains[verdict].members.push_back(m.add_constant("yes"));
      PredicateSignature sig;
      sig.name = "answer";
      DomainId pos = m.domain_index.at("cellpos");
      for (int i = 0; i < 16; ++i) sig.domains.push_back(pos);
      sig.domains.push_back(verdict);
      PredId pred = m.add_predicate(std::move(sig));
      LabelEntry head;
      head.pred = pred;
      head.sid = task.circuit.root_sid();
      head.kind = LabelKind::Perceptual;
      head.input_dim = 64;
      head.hidden = spec.hidden;
      head.class_arg = 16;
      m.labelling.entries.push_back(head);
      std::int32_t head_entry = static_cast<std::int32_t>(m.labelling.entries.size()) - 1;
      objective = std::make_unique<LossModeObjective>(m, head_entry, task.circuit, data,
                                                      spec.semantics);
    }
    ParameterStore params(m, spec.seed);
    TrainResult tr = train(*objective, params, data, config);
    out.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.epochs = tr.epochs_run;

    std::vector<int> test = data.rows_of_split(2);
    Eigen::MatrixXd scores = objective->predict(test, params);
    Eigen::VectorXd score =
        scores.cols() > 1 ? scores.col(scores.cols() - 1) : scores.col(0);
    std::vector<int> labels;
    for (int r : test) labels.push_back(static_cast<int>(data.real_targets[r]));
    out.metric = "average-precision";
    out.value = average_precision(score, labels);
    out.prediction_entropy = mean_entropy(scores);
    out.latent_accuracy = latent_accuracy(m, cell_entry, params, data, test, 4, true);
    return out;
  }

  if (spec.task == "alarm") {
    Dataset data = make_alarm_data(spec.data_rows, spec.seed * 977 + 13);
    AlarmTask task = build_alarm_task(spec.hidden);
    config.loss = TrainConfig::LossKind::BinaryCrossEntropy;
    ArchitectureObjective objective(task.model, task.circuit, data, Semantics::Probabilistic,
                                    config.loss);
    ParameterStore params(task.model, spec.seed);
    TrainResult tr = train(objective, params, data, config);
    out.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.epochs = tr.epochs_run;
    std::vector<int> test = data.rows_of_split(2);
    Eigen::MatrixXd scores = objective.predict(test, params);
    std::vector<int> labels;
    for (int r : test) labels.push_back(static_cast<int>(data.real_targets[r]));
    out.metric = "average-precision";
    out.value = average_precision(scores.col(0), labels);
    out.latent_accuracy = 0.0;
    return out;
  }

  fail("unknown task '" + spec.task + "'");
}

}  // namespace deeplog
