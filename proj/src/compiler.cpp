#include "deeplog/compiler.hpp"

#include <algorithm>
#include <chrono>
#include <functional>

namespace deeplog {

namespace {

LeafAtom leaf_atom_of(const Atom& a, const std::map<std::string, std::int32_t>& slots) {
  LeafAtom out;
  out.pred = a.pred;
  for (const Term& t : a.args) {
    if (t.is_var) {
      auto it = slots.find(t.var);
      if (it == slots.end())
        fail("free variable '" + t.var + "' is not a formula parameter");
      out.args.push_back(ArgRef::slot(it->second));
    } else {
      out.args.push_back(ArgRef::constant(t.constant));
    }
  }
  return out;
}

std::map<std::string, std::int32_t> slot_map_of(
    const std::vector<std::pair<std::string, DomainId>>& params) {
  std::map<std::string, std::int32_t> slots;
  for (std::size_t i = 0; i < params.size(); ++i)
    slots.emplace(params[i].first, static_cast<std::int32_t>(i));
  return slots;
}

std::vector<std::string> slot_names_of(
    const std::vector<std::pair<std::string, DomainId>>& params) {
  std::vector<std::string> names;
  for (const auto& [n, d] : params) names.push_back(n);
  return names;
}

// Class index of a categorical atom: position of the class-argument constant
// in the class domain.
std::int32_t class_index(const Model& m, const LabelEntry& e, const Atom& a) {
  const Term& t = a.args.at(e.class_arg);
  if (t.is_var) fail("atom '" + print_atom(m, a) + "' has a variable class argument");
  DomainId dom = m.predicates.at(a.pred).domains.at(e.class_arg);
  const auto& members = m.domains.at(dom).members;
  auto it = std::find(members.begin(), members.end(), t.constant);
  if (it == members.end()) fail("class constant outside its domain");
  return static_cast<std::int32_t>(it - members.begin());
}

// Weight leaf of a literal under a prob labelling: Bernoulli entries read the
// truth component, categorical entries read the class score when positive
// and contribute the unit weight when negative. Missing entries weigh 1.
std::int32_t weight_leaf(CircuitBuilder& b, const Model& m, StructId prob_sid, const Atom& a,
                         bool positive, const std::map<std::string, std::int32_t>& slots) {
  const LabelEntry* e = m.labelling.find(a.pred, prob_sid);
  if (!e) return b.constant(prob_sid, Value::real(1.0));
  std::int32_t entry = static_cast<std::int32_t>(e - m.labelling.entries.data());
  if (e->class_arg >= 0) {
    if (!positive) return b.constant(prob_sid, Value::real(1.0));
    return b.leaf(entry, leaf_atom_of(a, slots), class_index(m, *e, a));
  }
  return b.leaf(entry, leaf_atom_of(a, slots), positive ? 1 : 0);
}

}  // namespace

FormulaPtr exactly_one_formula(const Model& m, StructId bool_sid,
                               const std::vector<Atom>& members) {
  (void)m;
  FormulaPtr out;
  for (std::size_t k = 0; k < members.size(); ++k) {
    FormulaPtr conj = f_atom(bool_sid, members[k]);
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (j == k) continue;
      conj = f_binary(bool_sid, "and", conj,
                      f_unary(bool_sid, "not", f_atom(bool_sid, members[j])));
    }
    out = out ? f_binary(bool_sid, "or", out, conj) : conj;
  }
  if (!out) fail("exactly-one constraint over an empty group");
  return out;
}

// ---------------------------------------------------------------------------
// push_transformation

Circuit push_transformation(const Model& m, const BoolNnf& nnf, NnfId ddnnf,
                            const Transformation& t,
                            const std::vector<std::pair<std::string, DomainId>>& params,
                            const std::string& name) {
  if (t.name != "iverson")
    fail("transformation '" + t.name +
         "' is not flagged homomorphic under determinism; only iverson push-down is supported");
  DdnnfReport report = check_d_dnnf(nnf.mgr, ddnnf);
  if (!report.decomposable || !report.deterministic)
    fail("non-d-DNNF input rejected: push-down needs a deterministic, decomposable form");

  StructId prob_sid = m.structure_id(t.target);
  auto slots = slot_map_of(params);
  CircuitBuilder b(m);
  std::unordered_map<NnfId, std::int32_t> memo;
  std::function<std::int32_t(NnfId)> rec = [&](NnfId id) -> std::int32_t {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const NnfNode& n = nnf.mgr.node(id);
    std::int32_t out;
    switch (n.kind) {
      case NnfNode::Kind::False: out = b.constant(prob_sid, Value::real(0.0)); break;
      case NnfNode::Kind::True: out = b.constant(prob_sid, Value::real(1.0)); break;
      case NnfNode::Kind::Lit:
        out = weight_leaf(b, m, prob_sid, nnf.var_atoms[n.var], n.positive, slots);
        break;
      case NnfNode::Kind::And: {
        std::vector<std::int32_t> kids;
        for (NnfId k : n.kids) kids.push_back(rec(k));
        out = b.fold_op(prob_sid, OpCode::Mul, std::move(kids));
        break;
      }
      case NnfNode::Kind::Or: {
        std::vector<std::int32_t> kids;
        for (NnfId k : n.kids) kids.push_back(rec(k));
        out = b.fold_op(prob_sid, OpCode::Add, std::move(kids));
        break;
      }
    }
    memo.emplace(id, out);
    return out;
  };
  b.add_root(rec(ddnnf));
  return b.finish(name, slot_names_of(params));
}

// ---------------------------------------------------------------------------
// resolve_aggregations

namespace {

struct WmcShape {
  std::vector<Atom> aggregated;  // outermost to innermost
  FormulaPtr logic;              // Boolean formula under the iverson transform
  std::vector<Atom> weight_atoms;
};

std::string atom_text(const Model& m, const Atom& a) { return print_atom(m, a); }

void collect_weight_atoms(const Model& m, const FormulaPtr& f, std::vector<Atom>& out) {
  switch (f->kind) {
    case Formula::Kind::Atom: out.push_back(f->atom); return;
    case Formula::Kind::Const: return;
    case Formula::Kind::Binary:
      if (f->op != "mul")
        fail("non-factorized weight part (operator '" + f->op +
             "'): encode dependencies through auxiliary atoms in the logic part instead");
      collect_weight_atoms(m, f->child, out);
      collect_weight_atoms(m, f->rhs, out);
      return;
    default:
      fail("non-factorized weight part: expected a product of probability atoms");
  }
}

void flatten_factors(const FormulaPtr& f, std::vector<FormulaPtr>& out) {
  if (f->kind == Formula::Kind::Binary && f->op == "mul") {
    flatten_factors(f->child, out);
    flatten_factors(f->rhs, out);
    return;
  }
  out.push_back(f);
}

WmcShape parse_wmc_shape(const Model& m, const FormulaPtr& body) {
  WmcShape shape;
  FormulaPtr f = body;
  while (f->kind == Formula::Kind::AggAtom) {
    if (f->op != "sum") fail("weighted-model-count shape aggregates with sum");
    shape.aggregated.push_back(f->atom);
    f = f->child;
  }
  if (shape.aggregated.empty())
    fail("not a weighted-model-count shape: no aggregation over atoms");

  std::vector<FormulaPtr> factors;
  flatten_factors(f, factors);
  FormulaPtr transform;
  for (const auto& factor : factors) {
    if (factor->kind != Formula::Kind::Transform) continue;
    if (transform) fail("weighted-model-count shape has a single transformed logic part");
    transform = factor;
  }
  if (!transform)
    fail("not a weighted-model-count shape: expected transform<prob, iverson>(logic) * weights");
  if (m.transformations.at(transform->transform).name != "iverson")
    fail("weighted-model-count shape needs the iverson transformation");
  shape.logic = transform->child;
  for (const auto& factor : factors)
    if (factor != transform) collect_weight_atoms(m, factor, shape.weight_atoms);

  std::set<std::string> agg_keys;
  for (const auto& a : shape.aggregated) {
    if (!agg_keys.insert(atom_text(m, a)).second)
      fail("atom aggregated twice: " + atom_text(m, a));
  }
  std::set<std::string> weight_seen;
  for (const auto& a : shape.weight_atoms) {
    std::string key = atom_text(m, a);
    if (!weight_seen.insert(key).second)
      fail("non-factorized weight part: atom '" + key + "' appears twice");
    if (!agg_keys.count(key))
      fail("weight atom '" + key + "' is not aggregated");
  }
  return shape;
}

std::vector<FormulaPtr> flatten_conjuncts(const FormulaPtr& f) {
  if (f->kind == Formula::Kind::Binary && f->op == "and") {
    auto l = flatten_conjuncts(f->child);
    auto r = flatten_conjuncts(f->rhs);
    l.insert(l.end(), r.begin(), r.end());
    return l;
  }
  return {f};
}

void count_atom_occurrences(const Model& m, const FormulaPtr& f,
                            std::map<std::string, std::int64_t>& counts) {
  switch (f->kind) {
    case Formula::Kind::Atom: ++counts[atom_text(m, f->atom)]; return;
    case Formula::Kind::Const: return;
    case Formula::Kind::Binary:
      count_atom_occurrences(m, f->child, counts);
      count_atom_occurrences(m, f->rhs, counts);
      return;
    default:
      if (f->child) count_atom_occurrences(m, f->child, counts);
      return;
  }
}

struct Decision {
  bool is_group = false;
  // plain
  Atom atom;
  const LabelEntry* entry = nullptr;  // may be null (unweighted)
  // group
  std::vector<Atom> members;  // by class index
  std::int64_t occurrences = 0;
};

}  // namespace

Circuit resolve_aggregations(const Model& m, const NamedFormula& nf, CompilationStats* stats) {
  auto t0 = std::chrono::steady_clock::now();
  StructId prob_sid = m.structure_id("prob");
  StructId bool_sid = m.structure_id("bool");
  (void)bool_sid;

  // degenerate shape: a transformed Boolean constant (e.g. nothing provable)
  if (nf.body->kind == Formula::Kind::Transform &&
      m.transformations.at(nf.body->transform).name == "iverson" &&
      nf.body->child->kind == Formula::Kind::Const) {
    CircuitBuilder cb(m);
    cb.add_root(cb.constant(prob_sid,
                            Value::real(nf.body->child->constant.truthy() ? 1.0 : 0.0)));
    if (stats)
      stats->wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
              .count();
    return cb.finish(nf.name, slot_names_of(nf.params));
  }
  WmcShape shape = parse_wmc_shape(m, nf.body);

  // categorical groups among the aggregated atoms
  std::map<std::string, std::vector<std::pair<std::int32_t, Atom>>> group_members;
  std::map<std::string, Atom> plain;  // aggregated atoms outside full groups
  for (const Atom& a : shape.aggregated) {
    const LabelEntry* e = m.labelling.find(a.pred, prob_sid);
    if (e && e->class_arg >= 0) {
      std::string key = std::to_string(a.pred);
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (static_cast<int>(i) == e->class_arg) continue;
        const Term& t = a.args[i];
        key += t.is_var ? "|v" + t.var : "|c" + std::to_string(t.constant);
      }
      group_members[key].emplace_back(class_index(m, *e, a), a);
    } else {
      plain.emplace(atom_text(m, a), a);
    }
  }

  // exactly-one conjuncts: strip matched ones, split those groups natively
  std::vector<FormulaPtr> conjuncts = flatten_conjuncts(shape.logic);
  std::vector<bool> conjunct_used(conjuncts.size(), false);
  std::vector<Decision> decisions;
  for (auto& [key, members] : group_members) {
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const LabelEntry* e = m.labelling.find(members[0].second.pred, prob_sid);
    DomainId dom = m.predicates.at(members[0].second.pred).domains.at(e->class_arg);
    bool full = members.size() == m.domains.at(dom).members.size();
    std::vector<Atom> atoms;
    for (auto& [k, a] : members) atoms.push_back(a);
    bool matched = false;
    if (full) {
      FormulaPtr canonical = exactly_one_formula(m, bool_sid, atoms);
      for (std::size_t i = 0; i < conjuncts.size(); ++i) {
        if (!conjunct_used[i] && formula_equal(conjuncts[i], canonical)) {
          conjunct_used[i] = true;
          matched = true;
          break;
        }
      }
    }
    if (matched) {
      Decision d;
      d.is_group = true;
      d.members = std::move(atoms);
      decisions.push_back(std::move(d));
    } else {
      for (auto& [k, a] : members) plain.emplace(atom_text(m, a), a);
    }
  }
  for (auto& [key, a] : plain) {
    Decision d;
    d.atom = a;
    d.entry = m.labelling.find(a.pred, prob_sid);
    decisions.push_back(std::move(d));
  }

  // residual logic after stripping the recognized exactly-one conjuncts
  FormulaPtr logic;
  for (std::size_t i = 0; i < conjuncts.size(); ++i) {
    if (conjunct_used[i]) continue;
    logic = logic ? f_binary(bool_sid, "and", logic, conjuncts[i]) : conjuncts[i];
  }
  if (!logic) logic = f_const(bool_sid, Value::boolean(true));

  // order decisions by descending occurrence count, ties by atom order
  std::map<std::string, std::int64_t> counts;
  count_atom_occurrences(m, logic, counts);
  for (auto& d : decisions) {
    if (d.is_group) {
      for (const Atom& a : d.members) d.occurrences += counts[atom_text(m, a)];
    } else {
      d.occurrences = counts[atom_text(m, d.atom)];
    }
  }
  std::stable_sort(decisions.begin(), decisions.end(), [&](const Decision& a, const Decision& b) {
    if (a.occurrences != b.occurrences) return a.occurrences > b.occurrences;
    const Atom& x = a.is_group ? a.members[0] : a.atom;
    const Atom& y = b.is_group ? b.members[0] : b.atom;
    return atom_order_less(x, y);
  });

  BoolNnf nnf = to_nnf(m, logic);
  if (stats) stats->input_atoms = shape.aggregated.size();

  // variable ids of decision atoms (absent atoms marginalize)
  auto var_of = [&](const Atom& a) -> std::int32_t {
    for (std::size_t i = 0; i < nnf.var_atoms.size(); ++i)
      if (nnf.var_atoms[i] == a) return static_cast<std::int32_t>(i);
    return -1;
  };
  struct DecisionVars {
    std::vector<std::int32_t> vars;  // per member (groups) or single (plain)
    bool normalized = false;
  };
  std::vector<DecisionVars> dvars(decisions.size());
  std::set<std::int32_t> decided_vars;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const Decision& d = decisions[i];
    if (d.is_group) {
      for (const Atom& a : d.members) dvars[i].vars.push_back(var_of(a));
      dvars[i].normalized = true;  // softmax group
    } else {
      dvars[i].vars.push_back(var_of(d.atom));
      dvars[i].normalized = d.entry ? d.entry->normalized() : false;
    }
    for (std::int32_t v : dvars[i].vars)
      if (v >= 0) decided_vars.insert(v);
  }
  for (std::size_t v = 0; v < nnf.var_atoms.size(); ++v)
    if (!decided_vars.count(static_cast<std::int32_t>(v)))
      fail("logic atom '" + atom_text(m, nnf.var_atoms[v]) +
           "' is not aggregated: the weighted-model-count shape aggregates every logic atom");

  auto slots = slot_map_of(nf.params);
  CircuitBuilder b(m);
  std::map<std::pair<NnfId, std::size_t>, std::int32_t> memo;
  std::size_t cache_hits = 0;

  std::function<std::int32_t(NnfId, std::size_t)> rec = [&](NnfId f,
                                                            std::size_t step) -> std::int32_t {
    // skip decisions that marginalize to the neutral element
    while (step < decisions.size()) {
      bool occurs = false;
      const auto& vs = nnf.mgr.vars(f);
      for (std::int32_t v : dvars[step].vars)
        if (v >= 0 && std::binary_search(vs.begin(), vs.end(), v)) occurs = true;
      if (occurs || !dvars[step].normalized) break;
      ++step;
    }
    if (step == decisions.size()) {
      if (f == kNnfTrue) return b.constant(prob_sid, Value::real(1.0));
      if (f == kNnfFalse) return b.constant(prob_sid, Value::real(0.0));
      fail("internal: undecided logic atoms remain after the decision sequence");
    }
    auto key = std::make_pair(f, step);
    auto it = memo.find(key);
    if (it != memo.end()) {
      ++cache_hits;
      return it->second;
    }
    if (b.size() > 2'000'000) fail("compilation size guard exceeded");

    const Decision& d = decisions[step];
    const DecisionVars& dv = dvars[step];
    std::int32_t out;
    if (d.is_group) {
      const LabelEntry* e = m.labelling.find(d.members[0].pred, prob_sid);
      std::int32_t entry = static_cast<std::int32_t>(e - m.labelling.entries.data());
      std::vector<std::int32_t> branches;
      for (std::size_t k = 0; k < d.members.size(); ++k) {
        NnfId residual = f;
        for (std::size_t j = 0; j < d.members.size(); ++j)
          if (dv.vars[j] >= 0)
            residual = nnf.mgr.condition(residual, dv.vars[j], j == k);
        if (residual == kNnfFalse) continue;
        std::int32_t w =
            b.leaf(entry, leaf_atom_of(d.members[k], slots), static_cast<std::int32_t>(k));
        branches.push_back(b.fold_op(prob_sid, OpCode::Mul, {w, rec(residual, step + 1)}));
      }
      out = branches.empty() ? b.constant(prob_sid, Value::real(0.0))
                             : b.fold_op(prob_sid, OpCode::Add, std::move(branches));
    } else {
      std::int32_t v = dv.vars[0];
      if (v < 0 && !dv.normalized) {
        // unnormalized marginal: multiply by w(false) + w(true)
        std::int32_t wf = weight_leaf(b, m, prob_sid, d.atom, false, slots);
        std::int32_t wt = weight_leaf(b, m, prob_sid, d.atom, true, slots);
        std::int32_t marg = b.fold_op(prob_sid, OpCode::Add, {wf, wt});
        out = b.fold_op(prob_sid, OpCode::Mul, {marg, rec(f, step + 1)});
      } else {
        std::vector<std::int32_t> branches;
        for (bool truth : {true, false}) {
          NnfId residual = v >= 0 ? nnf.mgr.condition(f, v, truth) : f;
          if (residual == kNnfFalse) continue;
          std::int32_t w = weight_leaf(b, m, prob_sid, d.atom, truth, slots);
          branches.push_back(b.fold_op(prob_sid, OpCode::Mul, {w, rec(residual, step + 1)}));
        }
        out = branches.empty() ? b.constant(prob_sid, Value::real(0.0))
                               : b.fold_op(prob_sid, OpCode::Add, std::move(branches));
      }
    }
    memo.emplace(key, out);
    return out;
  };

  b.add_root(rec(nnf.root, 0));
  Circuit c = b.finish(nf.name, slot_names_of(nf.params));
  if (stats) {
    stats->ddnnf_nodes = memo.size();
    stats->circuit_nodes = c.size();
    stats->cache_hits = cache_hits;
    stats->wall_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  }
  return c;
}

// ---------------------------------------------------------------------------
// compile_fuzzy

namespace {

std::int32_t fuzzy_leaf(CircuitBuilder& b, const Model& m, StructId sid, const Atom& a,
                        const std::map<std::string, std::int32_t>& slots) {
  const LabelEntry* e = m.labelling.find(a.pred, sid);
  if (!e)
    fail("no labelling for " + print_atom(m, a) + " @ " + m.structures.at(sid));
  std::int32_t entry = static_cast<std::int32_t>(e - m.labelling.entries.data());
  if (e->kind == LabelKind::Identity)
    fail("identity labelling has no score producer; bind a table or a parametric "
         "labelling to fuzzy leaves");
  std::int32_t component = e->class_arg >= 0 ? class_index(m, *e, a) : 1;
  return b.leaf(entry, leaf_atom_of(a, slots), component);
}

}  // namespace

Circuit compile_fuzzy(const Model& m, const NamedFormula& nf) {
  const AlgebraicStructure& root_st = m.structure(nf.body->sid);
  if (root_st.value_kind != ValueKind::Fuzzy)
    fail("compile_fuzzy expects a formula over a fuzzy structure");
  auto slots = slot_map_of(nf.params);
  CircuitBuilder b(m);
  std::function<std::int32_t(const FormulaPtr&)> rec =
      [&](const FormulaPtr& f) -> std::int32_t {
    switch (f->kind) {
      case Formula::Kind::Atom: return fuzzy_leaf(b, m, f->sid, f->atom, slots);
      case Formula::Kind::Const: return b.constant(f->sid, f->constant);
      case Formula::Kind::Unary:
        return b.fold_op(f->sid, opcode_of(m.structure(f->sid), f->op), {rec(f->child)});
      case Formula::Kind::Binary:
        return b.fold_op(f->sid, opcode_of(m.structure(f->sid), f->op),
                         {rec(f->child), rec(f->rhs)});
      case Formula::Kind::AggAtom:
        fail("aggregation over atoms has no single-circuit form under fuzzy semantics; "
             "use the sampled-expectation (probabilistic-fuzzy) mode");
      case Formula::Kind::AggVar: {
        const Aggregator& agg = m.structure(f->sid).aggregator(f->op);
        OpCode code = opcode_of(m.structure(f->sid), f->op);
        std::int32_t acc = b.constant(f->sid, agg.init);
        for (ConstId c : m.domains.at(f->var_domain).members) {
          FormulaPtr inst = substitute(m, f->child, VariableAssignment{{f->var, c}});
          acc = b.fold_op(f->sid, code, {acc, rec(inst)});
        }
        return acc;
      }
      case Formula::Kind::Transform:
        fail("structure transformations have no fuzzy circuit mapping");
    }
    fail("unreachable");
  };
  b.add_root(rec(nf.body));
  return b.finish(nf.name, slot_names_of(nf.params));
}

// ---------------------------------------------------------------------------
// simplify

Circuit simplify(const Model& m, const Circuit& c) {
  Circuit current = c;
  for (int pass = 0; pass < 8; ++pass) {
    // reachable set
    std::vector<char> live(current.size(), 0);
    std::vector<std::int32_t> stack(current.roots.begin(), current.roots.end());
    while (!stack.empty()) {
      std::int32_t n = stack.back();
      stack.pop_back();
      if (live[n]) continue;
      live[n] = 1;
      auto [ks, cnt] = current.node_kids(n);
      for (std::int32_t i = 0; i < cnt; ++i) stack.push_back(ks[i]);
    }

    CircuitBuilder b(m);
    std::vector<std::int32_t> remap(current.size(), -1);
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (!live[i]) continue;
      const CircuitNode& n = current.nodes[i];
      switch (n.kind) {
        case CircuitNode::Kind::Leaf: {
          const LeafRef& lr = current.leaves[n.a];
          remap[i] = b.leaf(lr.entry, lr.atom, lr.component);
          break;
        }
        case CircuitNode::Kind::Const:
          remap[i] = b.constant(n.sid, current.consts[n.a]);
          break;
        case CircuitNode::Kind::Transform:
          remap[i] = b.transform(n.sid, n.b, remap[n.a]);
          break;
        case CircuitNode::Kind::Op: {
          auto [ks, cnt] = current.node_kids(static_cast<std::int32_t>(i));
          std::vector<std::int32_t> kids;
          for (std::int32_t j = 0; j < cnt; ++j) kids.push_back(remap[ks[j]]);
          const AlgebraicStructure& st = m.structure(n.sid);
          bool idem = st.laws.idempotent.count(opcode_name(n.op)) > 0;
          if (idem && std::all_of(kids.begin(), kids.end(),
                                  [&](std::int32_t k) { return k == kids[0]; })) {
            remap[i] = kids[0];
          } else {
            remap[i] = b.fold_op(n.sid, n.op, std::move(kids));
          }
          break;
        }
      }
    }
    for (std::int32_t r : current.roots) b.add_root(remap[r]);
    Circuit next = b.finish(current.name, current.slots);
    bool stable = next.size() == current.size();
    current = std::move(next);
    if (stable) break;
  }
  return current;
}

}  // namespace deeplog
