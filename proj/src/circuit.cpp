#include "deeplog/circuit.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "deeplog/parser.hpp"

namespace deeplog {

OpCode opcode_of(const AlgebraicStructure& s, const std::string& op_name) {
  if (op_name == "or") return OpCode::Or;
  if (op_name == "and") return OpCode::And;
  if (op_name == "not") return OpCode::Not;
  if (op_name == "add") return OpCode::Add;
  if (op_name == "mul") return OpCode::Mul;
  fail("structure '" + s.name + "' has no circuit operator '" + op_name + "'");
}

const char* opcode_name(OpCode op) {
  switch (op) {
    case OpCode::Or: return "or";
    case OpCode::And: return "and";
    case OpCode::Not: return "not";
    case OpCode::Add: return "add";
    case OpCode::Mul: return "mul";
  }
  return "?";
}

StructId Circuit::root_sid() const {
  if (roots.empty()) fail("circuit has no roots");
  StructId sid = nodes[roots[0]].sid;
  for (std::int32_t r : roots)
    if (nodes[r].sid != sid) fail("circuit roots live in different structures");
  return sid;
}

// ---------------------------------------------------------------------------
// Builder

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

CircuitBuilder::CircuitBuilder(const Model& m) : model_(m) {
  circuit_.structures = m.structures;
  for (const auto& t : m.transformations) circuit_.transformations.push_back(t.name);
}

std::int32_t CircuitBuilder::intern(CircuitNode n) {
  std::uint64_t h = static_cast<std::uint64_t>(n.kind);
  h = mix(h, static_cast<std::uint64_t>(n.op));
  h = mix(h, static_cast<std::uint64_t>(n.sid));
  if (n.kind == CircuitNode::Kind::Op) {
    // hash the child values, not the offset, so equal ops dedup
    h = mix(h, static_cast<std::uint64_t>(n.b));
    for (std::int32_t i = 0; i < n.b; ++i)
      h = mix(h, static_cast<std::uint64_t>(circuit_.kids[n.a + i]));
  } else {
    h = mix(h, static_cast<std::uint64_t>(n.a));
    h = mix(h, static_cast<std::uint64_t>(n.b));
  }
  auto& bucket = cons_[h];
  for (std::int32_t id : bucket) {
    const CircuitNode& o = circuit_.nodes[id];
    if (o.kind != n.kind || o.op != n.op || o.sid != n.sid || o.b != n.b) continue;
    if (n.kind == CircuitNode::Kind::Op) {
      bool same = true;
      for (std::int32_t i = 0; i < n.b && same; ++i)
        same = circuit_.kids[o.a + i] == circuit_.kids[n.a + i];
      if (same) return id;
    } else if (o.a == n.a) {
      return id;
    }
  }
  std::int32_t id = static_cast<std::int32_t>(circuit_.nodes.size());
  circuit_.nodes.push_back(n);
  bucket.push_back(id);
  return id;
}

std::int32_t CircuitBuilder::leaf(std::int32_t entry, LeafAtom atom, std::int32_t component) {
  LeafRef ref{entry, std::move(atom), component};
  auto it = leaf_index_.find(ref);
  std::int32_t leaf_id;
  if (it != leaf_index_.end()) {
    leaf_id = it->second;
  } else {
    leaf_id = static_cast<std::int32_t>(circuit_.leaves.size());
    circuit_.leaves.push_back(ref);
    leaf_index_.emplace(std::move(ref), leaf_id);
  }
  CircuitNode n;
  n.kind = CircuitNode::Kind::Leaf;
  n.sid = model_.labelling.entries.at(entry).sid;
  n.a = leaf_id;
  return intern(n);
}

std::int32_t CircuitBuilder::constant(StructId sid, Value v) {
  auto key = std::make_pair(sid, std::make_pair(v.a, v.b));
  auto it = const_index_.find(key);
  std::int32_t cid;
  if (it != const_index_.end()) {
    cid = it->second;
  } else {
    cid = static_cast<std::int32_t>(circuit_.consts.size());
    circuit_.consts.push_back(v);
    const_index_.emplace(key, cid);
  }
  CircuitNode n;
  n.kind = CircuitNode::Kind::Const;
  n.sid = sid;
  n.a = cid;
  return intern(n);
}

bool CircuitBuilder::is_const(std::int32_t id, double v) const {
  const CircuitNode& n = circuit_.nodes[id];
  return n.kind == CircuitNode::Kind::Const && circuit_.consts[n.a].a == v;
}

std::int32_t CircuitBuilder::op(StructId sid, OpCode code, std::vector<std::int32_t> operands) {
  const AlgebraicStructure& st = model_.structure(sid);
  if (code == OpCode::Not) {
    if (operands.size() != 1) fail("unary operator takes one operand");
  } else if (operands.size() < 2) {
    fail("binary operator takes at least two operands");
  } else if (operands.size() > 2 && st.kind != StructureKind::Probability &&
             st.kind != StructureKind::Dual) {
    fail("n-ary operators are reserved for the probability structure");
  }
  for (std::int32_t k : operands)
    if (circuit_.nodes[k].sid != sid)
      fail("operand structure mismatch when building a circuit node");
  CircuitNode n;
  n.kind = CircuitNode::Kind::Op;
  n.op = code;
  n.sid = sid;
  n.a = static_cast<std::int32_t>(circuit_.kids.size());
  n.b = static_cast<std::int32_t>(operands.size());
  circuit_.kids.insert(circuit_.kids.end(), operands.begin(), operands.end());
  std::int32_t id = intern(n);
  if (circuit_.nodes[id].a != n.a) circuit_.kids.resize(n.a);  // deduplicated: drop the copy
  return id;
}

std::int32_t CircuitBuilder::fold_op(StructId sid, OpCode code,
                                     std::vector<std::int32_t> operands) {
  const AlgebraicStructure& st = model_.structure(sid);
  const char* name = opcode_name(code);
  if (code == OpCode::Not) {
    std::int32_t c = operands.at(0);
    if (circuit_.nodes[c].kind == CircuitNode::Kind::Const)
      return constant(sid, st.unary(name)(circuit_.consts[circuit_.nodes[c].a]));
    return op(sid, code, std::move(operands));
  }

  auto neutral_it = st.laws.neutral.find(name);
  auto annihil_it = st.laws.annihilator.find(name);
  const BinaryFn& fn = st.binary(name);

  std::vector<std::int32_t> rest;
  std::optional<Value> folded;
  for (std::int32_t k : operands) {
    const CircuitNode& kn = circuit_.nodes[k];
    if (kn.kind == CircuitNode::Kind::Const) {
      const Value& v = circuit_.consts[kn.a];
      if (annihil_it != st.laws.annihilator.end() && approx_equal(v, annihil_it->second, 0.0))
        return constant(sid, annihil_it->second);
      if (neutral_it != st.laws.neutral.end() && approx_equal(v, neutral_it->second, 0.0))
        continue;
      folded = folded ? fn(*folded, v) : v;
    } else {
      rest.push_back(k);
    }
  }
  if (folded) {
    if (annihil_it != st.laws.annihilator.end() &&
        approx_equal(*folded, annihil_it->second, 0.0))
      return constant(sid, annihil_it->second);
    if (!(neutral_it != st.laws.neutral.end() && approx_equal(*folded, neutral_it->second, 0.0)))
      rest.push_back(constant(sid, *folded));
  }
  if (rest.empty()) {
    if (neutral_it != st.laws.neutral.end()) return constant(sid, neutral_it->second);
    fail("operator fold eliminated every operand and no neutral element is declared");
  }
  if (rest.size() == 1) return rest[0];
  if (rest.size() > 2 && st.kind != StructureKind::Probability &&
      st.kind != StructureKind::Dual) {
    // chain binary applications left to right
    std::int32_t acc = rest[0];
    for (std::size_t i = 1; i < rest.size(); ++i) acc = op(sid, code, {acc, rest[i]});
    return acc;
  }
  return op(sid, code, std::move(rest));
}

std::int32_t CircuitBuilder::transform(StructId sid, std::int32_t transform_index,
                                       std::int32_t child) {
  CircuitNode n;
  n.kind = CircuitNode::Kind::Transform;
  n.sid = sid;
  n.a = child;
  n.b = transform_index;
  return intern(n);
}

void CircuitBuilder::add_root(std::int32_t id) { circuit_.roots.push_back(id); }

Circuit CircuitBuilder::finish(std::string name, std::vector<std::string> slot_names) {
  circuit_.name = std::move(name);
  circuit_.slots = std::move(slot_names);

  // sweep nodes unreachable from the roots (folded-away intermediates)
  std::vector<char> live(circuit_.nodes.size(), 0);
  std::vector<std::int32_t> stack(circuit_.roots.begin(), circuit_.roots.end());
  while (!stack.empty()) {
    std::int32_t n = stack.back();
    stack.pop_back();
    if (live[n]) continue;
    live[n] = 1;
    auto [ks, cnt] = circuit_.node_kids(n);
    for (std::int32_t i = 0; i < cnt; ++i) stack.push_back(ks[i]);
  }
  Circuit out;
  out.name = circuit_.name;
  out.slots = circuit_.slots;
  out.structures = circuit_.structures;
  out.transformations = circuit_.transformations;
  std::vector<std::int32_t> node_map(circuit_.nodes.size(), -1);
  std::vector<std::int32_t> leaf_map(circuit_.leaves.size(), -1);
  std::vector<std::int32_t> const_map(circuit_.consts.size(), -1);
  for (std::size_t i = 0; i < circuit_.nodes.size(); ++i) {
    if (!live[i]) continue;
    CircuitNode n = circuit_.nodes[i];
    switch (n.kind) {
      case CircuitNode::Kind::Leaf:
        if (leaf_map[n.a] < 0) {
          leaf_map[n.a] = static_cast<std::int32_t>(out.leaves.size());
          out.leaves.push_back(circuit_.leaves[n.a]);
        }
        n.a = leaf_map[n.a];
        break;
      case CircuitNode::Kind::Const:
        if (const_map[n.a] < 0) {
          const_map[n.a] = static_cast<std::int32_t>(out.consts.size());
          out.consts.push_back(circuit_.consts[n.a]);
        }
        n.a = const_map[n.a];
        break;
      case CircuitNode::Kind::Op: {
        std::int32_t begin = static_cast<std::int32_t>(out.kids.size());
        for (std::int32_t j = 0; j < n.b; ++j)
          out.kids.push_back(node_map[circuit_.kids[n.a + j]]);
        n.a = begin;
        break;
      }
      case CircuitNode::Kind::Transform: n.a = node_map[n.a]; break;
    }
    node_map[i] = static_cast<std::int32_t>(out.nodes.size());
    out.nodes.push_back(n);
  }
  for (std::int32_t r : circuit_.roots) out.roots.push_back(node_map[r]);
  return out;
}

Circuit compose(const Circuit& c1, const Circuit& c2, const std::string& op_name,
                const std::string& structure) {
  if (c1.structures != c2.structures || c1.transformations != c2.transformations)
    fail("compose requires circuits compiled against the same model");
  if (c1.roots.size() != 1 || c2.roots.size() != 1)
    fail("compose expects single-rooted circuits");
  const AlgebraicStructure& st = structure_by_name(structure);
  OpCode code = opcode_of(st, op_name);
  auto sid_name = [&](const Circuit& c) { return c.structures.at(c.nodes[c.roots[0]].sid); };
  if (sid_name(c1) != structure || sid_name(c2) != structure)
    fail("structure mismatch without transform: compose(" + sid_name(c1) + ", " + sid_name(c2) +
         ") under " + structure);

  Circuit out = c1;
  out.name = c1.name + "+" + c2.name;
  // merge slot tables by name
  std::vector<std::int32_t> slot_map(c2.slots.size());
  for (std::size_t i = 0; i < c2.slots.size(); ++i) {
    auto it = std::find(out.slots.begin(), out.slots.end(), c2.slots[i]);
    if (it == out.slots.end()) {
      out.slots.push_back(c2.slots[i]);
      slot_map[i] = static_cast<std::int32_t>(out.slots.size()) - 1;
    } else {
      slot_map[i] = static_cast<std::int32_t>(it - out.slots.begin());
    }
  }
  const std::int32_t node_off = static_cast<std::int32_t>(out.nodes.size());
  const std::int32_t kid_off = static_cast<std::int32_t>(out.kids.size());
  const std::int32_t leaf_off = static_cast<std::int32_t>(out.leaves.size());
  const std::int32_t const_off = static_cast<std::int32_t>(out.consts.size());
  for (LeafRef lr : c2.leaves) {
    for (auto& a : lr.atom.args)
      if (a.is_slot) a.value = slot_map[a.value];
    out.leaves.push_back(std::move(lr));
  }
  out.consts.insert(out.consts.end(), c2.consts.begin(), c2.consts.end());
  for (std::int32_t k : c2.kids) out.kids.push_back(k + node_off);
  for (CircuitNode n : c2.nodes) {
    switch (n.kind) {
      case CircuitNode::Kind::Leaf: n.a += leaf_off; break;
      case CircuitNode::Kind::Const: n.a += const_off; break;
      case CircuitNode::Kind::Op: n.a += kid_off; break;
      case CircuitNode::Kind::Transform: n.a += node_off; break;
    }
    out.nodes.push_back(n);
  }
  CircuitNode root;
  root.kind = CircuitNode::Kind::Op;
  root.op = code;
  root.sid = c1.nodes[c1.roots[0]].sid;
  root.a = static_cast<std::int32_t>(out.kids.size());
  root.b = 2;
  out.kids.push_back(c1.roots[0]);
  out.kids.push_back(c2.roots[0] + node_off);
  out.nodes.push_back(root);
  out.roots = {static_cast<std::int32_t>(out.nodes.size()) - 1};
  return out;
}

// ---------------------------------------------------------------------------
// ParameterStore

namespace {

std::int32_t entry_classes(const Model& m, const LabelEntry& e) {
  if (e.class_arg < 0) return 2;
  DomainId dom = m.predicates.at(e.pred).domains.at(e.class_arg);
  return static_cast<std::int32_t>(m.domains.at(dom).members.size());
}

void enumerate_instances(const Model& m, const LabelEntry& e,
                         std::map<std::vector<ConstId>, std::int32_t>& out) {
  const auto& sig = m.predicates.at(e.pred);
  std::vector<DomainId> doms;
  for (std::size_t i = 0; i < sig.domains.size(); ++i)
    if (static_cast<int>(i) != e.class_arg) doms.push_back(sig.domains[i]);
  std::vector<ConstId> args(doms.size());
  std::int32_t next = 0;
  std::function<void(std::size_t)> rec = [&](std::size_t pos) {
    if (pos == doms.size()) {
      out.emplace(args, next++);
      return;
    }
    for (ConstId c : m.domains.at(doms[pos]).members) {
      args[pos] = c;
      rec(pos + 1);
    }
  };
  rec(0);
}

}  // namespace

ParameterStore::ParameterStore(const Model& m, std::uint64_t seed) {
  for (std::size_t ei = 0; ei < m.labelling.entries.size(); ++ei) {
    const LabelEntry& e = m.labelling.entries[ei];
    if (!e.parametric()) continue;
    ParamBlock b;
    b.entry = static_cast<std::int32_t>(ei);
    b.kind = e.kind;
    b.classes = entry_classes(m, e);
    b.name = m.predicates.at(e.pred).name + "@" + m.structures.at(e.sid);
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (ei + 1)));
    std::normal_distribution<double> init(0.0, 0.1);
    if (e.kind == LabelKind::Perceptual) {
      PerceptualParams p;
      int in = e.input_dim;
      if (e.hidden > 0) {
        p.w1.resize(e.hidden, in);
        p.b1 = Eigen::VectorXd::Zero(e.hidden);
        p.w2.resize(b.classes, e.hidden);
      } else {
        p.w2.resize(b.classes, in);
      }
      p.b2 = Eigen::VectorXd::Zero(b.classes);
      for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = init(rng);
      for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = init(rng);
      p.gw1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
      p.gw2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
      p.gb1 = Eigen::VectorXd::Zero(p.b1.size());
      p.gb2 = Eigen::VectorXd::Zero(p.b2.size());
      b.perceptual = std::move(p);
    } else {
      CategoricalParams cp;
      enumerate_instances(m, e, cp.instance_index);
      cp.logits.resize(static_cast<Eigen::Index>(cp.instance_index.size()), b.classes);
      for (Eigen::Index i = 0; i < cp.logits.size(); ++i) cp.logits.data()[i] = init(rng);
      cp.glogits = Eigen::MatrixXd::Zero(cp.logits.rows(), cp.logits.cols());
      b.categorical = std::move(cp);
    }
    blocks_.push_back(std::move(b));
  }
  for (auto& b : blocks_) index_block(b);
}

void ParameterStore::index_block(ParamBlock& b) {
  auto add = [&](Eigen::MatrixXd& v, Eigen::MatrixXd& g) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      values_.push_back(v.data() + i);
      grads_.push_back(g.data() + i);
    }
  };
  auto addv = [&](Eigen::VectorXd& v, Eigen::VectorXd& g) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      values_.push_back(v.data() + i);
      grads_.push_back(g.data() + i);
    }
  };
  if (b.perceptual) {
    add(b.perceptual->w1, b.perceptual->gw1);
    addv(b.perceptual->b1, b.perceptual->gb1);
    add(b.perceptual->w2, b.perceptual->gw2);
    addv(b.perceptual->b2, b.perceptual->gb2);
  }
  if (b.categorical) add(b.categorical->logits, b.categorical->glogits);
}

void ParameterStore::zero_grad() {
  for (double* g : grads_) *g = 0.0;
}

const ParamBlock* ParameterStore::block_for_entry(std::int32_t entry) const {
  for (const auto& b : blocks_)
    if (b.entry == entry) return &b;
  return nullptr;
}

ParamBlock* ParameterStore::block_for_entry(std::int32_t entry) {
  for (auto& b : blocks_)
    if (b.entry == entry) return &b;
  return nullptr;
}

void ParameterStore::save(std::ostream& os) const {
  os << "DLP1 " << num_params() << "\n";
  for (std::size_t i = 0; i < num_params(); ++i) {
    double v = get(i);
    os.write(reinterpret_cast<const char*>(&v), sizeof(double));
  }
}

ParameterStore ParameterStore::load(std::istream& is, const Model& m) {
  std::string magic;
  std::size_t n = 0;
  is >> magic >> n;
  if (magic != "DLP1") fail("parameter file: bad magic");
  is.get();  // newline
  ParameterStore store(m, 0);
  if (n != store.num_params()) fail("parameter file does not match the model");
  for (std::size_t i = 0; i < n; ++i) {
    double v;
    is.read(reinterpret_cast<char*>(&v), sizeof(double));
    if (!is) fail("parameter file truncated");
    store.set(i, v);
  }
  return store;
}

namespace {

// Softmax scores of a ground atom's labelling group (single instance).
Eigen::VectorXd ground_atom_scores(const Model& m, const ParameterStore& store,
                                   const LabelEntry& e, std::int32_t entry,
                                   const GroundAtom& atom) {
  const ParamBlock* b = store.block_for_entry(entry);
  if (!b) fail("no parameter block for a parametric labelling");
  std::vector<ConstId> group_args;
  for (std::size_t i = 0; i < atom.args.size(); ++i)
    if (static_cast<int>(i) != e.class_arg) group_args.push_back(atom.args[i]);
  Eigen::VectorXd logits;
  if (e.kind == LabelKind::Categorical) {
    auto it = b->categorical->instance_index.find(group_args);
    if (it == b->categorical->instance_index.end()) fail("unknown categorical instance");
    logits = b->categorical->logits.row(it->second).transpose();
  } else {
    std::vector<double> x;
    for (ConstId c : group_args) {
      const auto& p = m.constants.at(c).payload;
      if (!p) fail("constant '" + m.const_name(c) + "' carries no payload");
      for (Eigen::Index j = 0; j < p->size(); ++j) x.push_back((*p)(j));
    }
    Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
    const PerceptualParams& pp = *b->perceptual;
    if (pp.w1.size() > 0) {
      Eigen::VectorXd h = ((pp.w1 * in) + pp.b1).array().tanh();
      logits = pp.w2 * h + pp.b2;
    } else {
      logits = pp.w2 * in + pp.b2;
    }
  }
  Eigen::VectorXd scores = (logits.array() - logits.maxCoeff()).exp();
  scores /= scores.sum();
  return scores;
}

}  // namespace

Value StoreResolver::label(const Model& m, const GroundAtom& atom, StructId sid,
                           const Value& truth) const {
  const LabelEntry* e = m.labelling.find(atom.pred, sid);
  if (!e)
    fail("labelling lookup miss: " + print_ground_atom(m, atom) + " @ " + m.structures.at(sid));
  if (!e->parametric()) {
    TableResolver tables;
    return tables.label(m, atom, sid, truth);
  }
  std::int32_t entry = static_cast<std::int32_t>(e - m.labelling.entries.data());
  Eigen::VectorXd scores = ground_atom_scores(m, *store, *e, entry, atom);
  const AlgebraicStructure& st = m.structure(sid);
  if (e->class_arg >= 0) {
    DomainId dom = m.predicates.at(atom.pred).domains.at(e->class_arg);
    const auto& members = m.domains.at(dom).members;
    auto it = std::find(members.begin(), members.end(), atom.args.at(e->class_arg));
    if (it == members.end()) fail("class constant outside its domain");
    double p = scores(static_cast<Eigen::Index>(it - members.begin()));
    if (st.value_kind == ValueKind::Fuzzy) return Value::fuzzy(p);
    return Value::real(truth.truthy() ? p : 1.0);
  }
  if (st.value_kind == ValueKind::Fuzzy) return Value::fuzzy(scores(1));
  return Value::real(truth.truthy() ? scores(1) : scores(0));
}

// ---------------------------------------------------------------------------
// Layerization

Layerization layerize(const Model& m, const Circuit& c) {
  Layerization plan;
  const std::size_t n = c.size();
  plan.depth.assign(n, 0);
  std::int32_t max_depth = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto [ks, cnt] = c.node_kids(static_cast<std::int32_t>(i));
    std::int32_t d = 0;
    for (std::int32_t j = 0; j < cnt; ++j) {
      if (ks[j] >= static_cast<std::int32_t>(i)) fail("circuit is not topologically sorted");
      d = std::max(d, plan.depth[ks[j]] + 1);
    }
    plan.depth[i] = d;
    max_depth = std::max(max_depth, d);
  }

  // leaf groups keyed by (entry, group args)
  std::map<std::pair<std::int32_t, std::vector<ArgRef>>, std::int32_t> group_index;
  plan.leaf_group_of.assign(c.leaves.size(), -1);
  for (std::size_t li = 0; li < c.leaves.size(); ++li) {
    const LeafRef& lr = c.leaves[li];
    const LabelEntry& e = m.labelling.entries.at(lr.entry);
    std::vector<ArgRef> group_args;
    for (std::size_t i = 0; i < lr.atom.args.size(); ++i)
      if (static_cast<int>(i) != e.class_arg) group_args.push_back(lr.atom.args[i]);
    auto key = std::make_pair(lr.entry, group_args);
    auto it = group_index.find(key);
    std::int32_t g;
    if (it == group_index.end()) {
      g = static_cast<std::int32_t>(plan.leaf_groups.size());
      LeafGroup lg;
      lg.entry = lr.entry;
      lg.group_args = std::move(group_args);
      lg.classes = entry_classes(m, e);
      plan.leaf_groups.push_back(std::move(lg));
      group_index.emplace(std::move(key), g);
    } else {
      g = it->second;
    }
    plan.leaf_group_of[li] = g;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const CircuitNode& nd = c.nodes[i];
    if (nd.kind == CircuitNode::Kind::Leaf)
      plan.leaf_groups[plan.leaf_group_of[nd.a]].outputs.push_back(
          {static_cast<std::int32_t>(i), c.leaves[nd.a].component});
    else if (nd.kind == CircuitNode::Kind::Const)
      plan.const_nodes.push_back(static_cast<std::int32_t>(i));
  }

  // layers of operator nodes, grouped by kernel in first-occurrence order
  plan.layers.resize(max_depth);
  for (std::size_t i = 0; i < n; ++i) {
    const CircuitNode& nd = c.nodes[i];
    if (nd.kind == CircuitNode::Kind::Leaf || nd.kind == CircuitNode::Kind::Const) continue;
    auto& layer = plan.layers[plan.depth[i] - 1];
    StructureKind skind = structure_by_name(c.structures.at(nd.sid)).kind;
    OpGroup* grp = nullptr;
    for (auto& g : layer)
      if (g.kind == nd.kind && g.skind == skind && g.op == nd.op &&
          g.transform == (nd.kind == CircuitNode::Kind::Transform ? nd.b : -1)) {
        grp = &g;
        break;
      }
    if (!grp) {
      OpGroup g;
      g.kind = nd.kind;
      g.skind = skind;
      g.op = nd.op;
      g.transform = nd.kind == CircuitNode::Kind::Transform ? nd.b : -1;
      layer.push_back(std::move(g));
      grp = &layer.back();
    }
    grp->members.push_back(static_cast<std::int32_t>(i));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Leaf evaluation

namespace {

Eigen::VectorXd payload_of_constant(const Model& m, ConstId c) {
  const auto& p = m.constants.at(c).payload;
  if (!p) fail("constant '" + m.const_name(c) + "' carries no payload");
  return *p;
}

// Payload matrix (rows x dim) for a group's non-class arguments.
Eigen::MatrixXd assemble_payloads(const Model& m, const LeafGroup& g, const Batch& batch) {
  std::vector<Eigen::MatrixXd> parts;
  for (const ArgRef& a : g.group_args) {
    if (!a.is_slot) {
      Eigen::VectorXd p = payload_of_constant(m, a.value);
      parts.push_back(p.transpose().replicate(batch.rows, 1));
    } else {
      if (a.value >= static_cast<std::int32_t>(batch.slots.size()))
        fail("missing payload for perceptual leaf: batch has no slot " +
             std::to_string(a.value));
      const SlotData& sd = batch.slots[a.value];
      if (sd.payloads) {
        if (sd.payloads->rows() != batch.rows) fail("slot payload rows do not match the batch");
        parts.push_back(*sd.payloads);
      } else if (sd.constants) {
        Eigen::MatrixXd rowsm;
        for (std::int32_t r = 0; r < batch.rows; ++r) {
          Eigen::VectorXd p = payload_of_constant(m, sd.constants->at(r));
          if (rowsm.size() == 0) rowsm.resize(batch.rows, p.size());
          rowsm.row(r) = p.transpose();
        }
        parts.push_back(std::move(rowsm));
      } else {
        fail("missing payload for perceptual leaf: empty slot data");
      }
    }
  }
  if (parts.empty()) fail("perceptual labelling needs at least one payload argument");
  Eigen::Index dim = 0;
  for (const auto& p : parts) dim += p.cols();
  Eigen::MatrixXd x(batch.rows, dim);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    x.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return x;
}

void softmax_rows(Eigen::MatrixXd& mat) {
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    double mx = mat.row(r).maxCoeff();
    mat.row(r) = (mat.row(r).array() - mx).exp();
    mat.row(r) /= mat.row(r).sum();
  }
}

// Scores (rows x classes) of one leaf group, caching what the reverse pass needs.
void eval_leaf_group(const Model& m, const LeafGroup& g, std::int32_t group_id,
                     const ParameterStore& params, const Batch& batch, GroupCache& cache,
                     const LeafNoise* noise) {
  const LabelEntry& e = m.labelling.entries.at(g.entry);
  if (noise) {
    auto ov = noise->score_override.find(group_id);
    if (ov != noise->score_override.end()) {
      cache.scores = ov->second;
      return;
    }
  }
  switch (e.kind) {
    case LabelKind::Identity:
      fail("identity labelling has no score producer at circuit evaluation time");
    case LabelKind::Table: {
      cache.scores.resize(batch.rows, 2);
      auto fill = [&](const std::vector<ConstId>& args, Eigen::Index row) {
        std::pair<double, double> fl;
        if (e.uniform_p) {
          fl = {1.0 - *e.uniform_p, *e.uniform_p};
        } else {
          auto it = e.table.find(args);
          if (it == e.table.end())
            fail("labelling lookup miss: no table entry for an atom instance");
          fl = it->second;
        }
        cache.scores(row, 0) = fl.first;
        cache.scores(row, 1) = fl.second;
      };
      bool any_slot = false;
      for (const auto& a : g.group_args) any_slot |= a.is_slot;
      if (!any_slot) {
        std::vector<ConstId> args;
        for (const auto& a : g.group_args) args.push_back(a.value);
        fill(args, 0);
        cache.scores = cache.scores.row(0).replicate(batch.rows, 1);
      } else {
        for (std::int32_t r = 0; r < batch.rows; ++r) {
          std::vector<ConstId> args;
          for (const auto& a : g.group_args) {
            if (!a.is_slot) {
              args.push_back(a.value);
            } else {
              const SlotData& sd = batch.slots.at(a.value);
              if (!sd.constants) fail("table labelling over a slot needs constant rows");
              args.push_back(sd.constants->at(r));
            }
          }
          fill(args, r);
        }
      }
      return;
    }
    case LabelKind::Categorical: {
      const ParamBlock* b = params.block_for_entry(g.entry);
      if (!b || !b->categorical) fail("no parameter block for a categorical labelling");
      cache.row_instance.assign(batch.rows, -1);
      Eigen::MatrixXd logits(batch.rows, b->classes);
      for (std::int32_t r = 0; r < batch.rows; ++r) {
        std::vector<ConstId> args;
        for (const auto& a : g.group_args) {
          if (!a.is_slot) {
            args.push_back(a.value);
          } else {
            const SlotData& sd = batch.slots.at(a.value);
            if (!sd.constants)
              fail("categorical labelling over a slot needs constant rows; "
                   "use a perceptual labelling for payload inputs");
            args.push_back(sd.constants->at(r));
          }
        }
        auto it = b->categorical->instance_index.find(args);
        if (it == b->categorical->instance_index.end())
          fail("labelling lookup miss: unknown categorical instance");
        cache.row_instance[r] = it->second;
        logits.row(r) = b->categorical->logits.row(it->second);
      }
      if (noise) {
        auto ns = noise->logit_noise.find(group_id);
        if (ns != noise->logit_noise.end()) logits += ns->second;
      }
      softmax_rows(logits);
      cache.scores = std::move(logits);
      return;
    }
    case LabelKind::Perceptual: {
      const ParamBlock* b = params.block_for_entry(g.entry);
      if (!b || !b->perceptual) fail("no parameter block for a perceptual labelling");
      const PerceptualParams& p = *b->perceptual;
      cache.inputs = assemble_payloads(m, g, batch);
      if (cache.inputs.cols() != (p.w1.size() > 0 ? p.w1.cols() : p.w2.cols()))
        fail("payload dimension does not match the perceptual labelling (dim=" +
             std::to_string(p.w1.size() > 0 ? p.w1.cols() : p.w2.cols()) + ", got " +
             std::to_string(cache.inputs.cols()) + ")");
      Eigen::MatrixXd logits;
      if (p.w1.size() > 0) {
        cache.hidden =
            ((cache.inputs * p.w1.transpose()).rowwise() + p.b1.transpose()).array().tanh();
        logits = (cache.hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
      } else {
        logits = (cache.inputs * p.w2.transpose()).rowwise() + p.b2.transpose();
      }
      if (noise) {
        auto ns = noise->logit_noise.find(group_id);
        if (ns != noise->logit_noise.end()) logits += ns->second;
      }
      softmax_rows(logits);
      cache.scores = std::move(logits);
      return;
    }
  }
}

using Col = Eigen::ArrayXXd::ColXpr;

void apply_kernel(StructureKind skind, OpCode op, Eigen::ArrayXXd& v, std::int32_t dst,
                  const std::int32_t* ks, std::int32_t cnt) {
  auto a = [&](std::int32_t i) { return v.col(ks[i]); };
  switch (skind) {
    case StructureKind::Probability:
    case StructureKind::Dual:
      if (op == OpCode::Add) {
        v.col(dst) = a(0);
        for (std::int32_t i = 1; i < cnt; ++i) v.col(dst) += a(i);
      } else if (op == OpCode::Mul) {
        v.col(dst) = a(0);
        for (std::int32_t i = 1; i < cnt; ++i) v.col(dst) *= a(i);
      } else {
        fail("operator not defined for the probability structure");
      }
      return;
    case StructureKind::Boolean:
      if (op == OpCode::Or) v.col(dst) = a(0).max(a(1));
      else if (op == OpCode::And) v.col(dst) = a(0).min(a(1));
      else v.col(dst) = 1.0 - a(0);
      return;
    case StructureKind::FuzzyGodel:
      if (op == OpCode::Or) v.col(dst) = a(0).max(a(1));
      else if (op == OpCode::And) v.col(dst) = a(0).min(a(1));
      else v.col(dst) = 1.0 - a(0);
      return;
    case StructureKind::FuzzyLukasiewicz:
      if (op == OpCode::Or) v.col(dst) = (a(0) + a(1)).min(1.0);
      else if (op == OpCode::And) v.col(dst) = (a(0) + a(1) - 1.0).max(0.0);
      else v.col(dst) = 1.0 - a(0);
      return;
    case StructureKind::FuzzyProduct:
      if (op == OpCode::Or) v.col(dst) = a(0) + a(1) - a(0) * a(1);
      else if (op == OpCode::And) v.col(dst) = a(0) * a(1);
      else v.col(dst) = 1.0 - a(0);
      return;
  }
}

}  // namespace

Eigen::MatrixXd eval_forward(const Model& m, const Circuit& c, const Layerization& plan,
                             const ParameterStore& params, const Batch& batch,
                             EvalWorkspace* ws, const LeafNoise* noise) {
  EvalWorkspace local;
  EvalWorkspace& w = ws ? *ws : local;
  w.values.resize(batch.rows, static_cast<Eigen::Index>(c.size()));
  w.groups.assign(plan.leaf_groups.size(), {});

  for (std::size_t g = 0; g < plan.leaf_groups.size(); ++g) {
    const LeafGroup& lg = plan.leaf_groups[g];
    eval_leaf_group(m, lg, static_cast<std::int32_t>(g), params, batch, w.groups[g], noise);
    const LabelEntry& e = m.labelling.entries.at(lg.entry);
    for (auto [node, component] : lg.outputs) {
      if (e.class_arg >= 0 && m.structure(e.sid).kind == StructureKind::Probability &&
          component < 0)
        fail("invalid leaf component");
      w.values.col(node) = w.groups[g].scores.col(component).array();
    }
  }
  for (std::int32_t n : plan.const_nodes)
    w.values.col(n).setConstant(c.consts[c.nodes[n].a].a);

  for (const auto& layer : plan.layers) {
    for (const OpGroup& grp : layer) {
      if (grp.kind == CircuitNode::Kind::Transform) {
        const std::string& tname = c.transformations.at(grp.transform);
        if (tname == "iverson") {
          for (std::int32_t n : grp.members) w.values.col(n) = w.values.col(c.nodes[n].a);
        } else {
          const Transformation& tr = transformation_by_name(tname);
          ValueKind src_kind = structure_by_name(tr.source).value_kind;
          for (std::int32_t n : grp.members) {
            for (std::int32_t r = 0; r < batch.rows; ++r) {
              Value in{src_kind, w.values(r, c.nodes[n].a), 0.0};
              w.values(r, n) = tr.map(in).a;
            }
          }
        }
        continue;
      }
      for (std::int32_t n : grp.members) {
        auto [ks, cnt] = c.node_kids(n);
        apply_kernel(grp.skind, grp.op, w.values, n, ks, cnt);
      }
    }
  }

  Eigen::MatrixXd out(batch.rows, static_cast<Eigen::Index>(c.roots.size()));
  for (std::size_t r = 0; r < c.roots.size(); ++r)
    out.col(static_cast<Eigen::Index>(r)) = w.values.col(c.roots[r]).matrix();
  return out;
}

namespace {

void leaf_group_backward(const Model& m, const LeafGroup& g, const GroupCache& cache,
                         ParameterStore& params, const Eigen::MatrixXd& dscores) {
  const LabelEntry& e = m.labelling.entries.at(g.entry);
  if (e.kind == LabelKind::Table || e.kind == LabelKind::Identity) return;
  ParamBlock* b = params.block_for_entry(g.entry);
  if (!b) return;
  const Eigen::MatrixXd& p = cache.scores;
  // softmax backward: dl = p .* (g - rowsum(g .* p))
  Eigen::VectorXd dot = (dscores.array() * p.array()).rowwise().sum();
  Eigen::MatrixXd dlogits = p.array() * (dscores.array().colwise() - dot.array());
  if (e.kind == LabelKind::Categorical) {
    for (Eigen::Index r = 0; r < dlogits.rows(); ++r)
      b->categorical->glogits.row(cache.row_instance[r]) += dlogits.row(r);
    return;
  }
  PerceptualParams& pp = *b->perceptual;
  if (pp.w1.size() > 0) {
    pp.gw2 += dlogits.transpose() * cache.hidden;
    pp.gb2 += dlogits.colwise().sum().transpose();
    Eigen::MatrixXd dh = dlogits * pp.w2;
    Eigen::MatrixXd dz = dh.array() * (1.0 - cache.hidden.array().square());
    pp.gw1 += dz.transpose() * cache.inputs;
    pp.gb1 += dz.colwise().sum().transpose();
  } else {
    pp.gw2 += dlogits.transpose() * cache.inputs;
    pp.gb2 += dlogits.colwise().sum().transpose();
  }
}

}  // namespace

void eval_gradient(const Model& m, const Circuit& c, const Layerization& plan,
                   ParameterStore& params, const Batch& batch,
                   const Eigen::MatrixXd& upstream, const EvalWorkspace& ws,
                   const LeafNoise* noise) {
  (void)noise;  // noise enters the logits additively; the backward pass is unchanged
  const AlgebraicStructure& root_st = structure_by_name(c.structures.at(c.root_sid()));
  if (root_st.value_kind == ValueKind::Boolean)
    fail("gradient requested over a Boolean structure");

  Eigen::ArrayXXd adj = Eigen::ArrayXXd::Zero(batch.rows, static_cast<Eigen::Index>(c.size()));
  for (std::size_t r = 0; r < c.roots.size(); ++r)
    adj.col(c.roots[r]) += upstream.col(static_cast<Eigen::Index>(r)).array();

  const Eigen::ArrayXXd& v = ws.values;
  for (auto layer = plan.layers.rbegin(); layer != plan.layers.rend(); ++layer) {
    for (const OpGroup& grp : *layer) {
      if (grp.kind == CircuitNode::Kind::Transform)
        fail("gradient through a structure transformation is not defined");
      for (std::int32_t n : grp.members) {
        auto [ks, cnt] = c.node_kids(n);
        auto an = adj.col(n);
        switch (grp.skind) {
          case StructureKind::Probability:
          case StructureKind::Dual:
            if (grp.op == OpCode::Add) {
              for (std::int32_t i = 0; i < cnt; ++i) adj.col(ks[i]) += an;
            } else if (cnt == 2) {
              adj.col(ks[0]) += an * v.col(ks[1]);
              adj.col(ks[1]) += an * v.col(ks[0]);
            } else {
              // product of siblings via prefix/suffix products
              Eigen::ArrayXXd pre(batch.rows, cnt), suf(batch.rows, cnt);
              pre.col(0) = 1.0;
              for (std::int32_t i = 1; i < cnt; ++i)
                pre.col(i) = pre.col(i - 1) * v.col(ks[i - 1]);
              suf.col(cnt - 1) = 1.0;
              for (std::int32_t i = cnt - 2; i >= 0; --i)
                suf.col(i) = suf.col(i + 1) * v.col(ks[i + 1]);
              for (std::int32_t i = 0; i < cnt; ++i)
                adj.col(ks[i]) += an * pre.col(i) * suf.col(i);
            }
            break;
          case StructureKind::Boolean:
            fail("gradient requested over a Boolean structure");
          case StructureKind::FuzzyGodel: {
            if (grp.op == OpCode::Not) {
              adj.col(ks[0]) -= an;
            } else {
              // subgradient to the attaining child, ties to the lower index
              Eigen::ArrayXd take_first;
              if (grp.op == OpCode::And)
                take_first = (v.col(ks[0]) <= v.col(ks[1])).cast<double>();
              else
                take_first = (v.col(ks[0]) >= v.col(ks[1])).cast<double>();
              adj.col(ks[0]) += an * take_first;
              adj.col(ks[1]) += an * (1.0 - take_first);
            }
            break;
          }
          case StructureKind::FuzzyLukasiewicz: {
            if (grp.op == OpCode::Not) {
              adj.col(ks[0]) -= an;
            } else {
              Eigen::ArrayXd open;
              if (grp.op == OpCode::And)
                open = (v.col(ks[0]) + v.col(ks[1]) > 1.0).cast<double>();
              else
                open = (v.col(ks[0]) + v.col(ks[1]) < 1.0).cast<double>();
              adj.col(ks[0]) += an * open;
              adj.col(ks[1]) += an * open;
            }
            break;
          }
          case StructureKind::FuzzyProduct: {
            if (grp.op == OpCode::Not) {
              adj.col(ks[0]) -= an;
            } else if (grp.op == OpCode::And) {
              adj.col(ks[0]) += an * v.col(ks[1]);
              adj.col(ks[1]) += an * v.col(ks[0]);
            } else {
              adj.col(ks[0]) += an * (1.0 - v.col(ks[1]));
              adj.col(ks[1]) += an * (1.0 - v.col(ks[0]));
            }
            break;
          }
        }
      }
    }
  }

  for (std::size_t g = 0; g < plan.leaf_groups.size(); ++g) {
    const LeafGroup& lg = plan.leaf_groups[g];
    Eigen::MatrixXd dscores = Eigen::MatrixXd::Zero(batch.rows, lg.classes);
    bool any = false;
    for (auto [node, component] : lg.outputs) {
      dscores.col(component) += adj.col(node).matrix();
      any = true;
    }
    if (any) leaf_group_backward(m, lg, ws.groups[g], params, dscores);
  }
}

// ---------------------------------------------------------------------------
// Naive recursive evaluation (baseline) and forward-mode checks

namespace {

struct DoubleView {
  double param(const double* p) const { return *p; }
};

struct DualView {
  const double* seed = nullptr;
  Dual param(const double* p) const { return Dual{*p, p == seed ? 1.0 : 0.0}; }
};

template <class S, class View>
struct NaiveEvaluator {
  const Model& m;
  const Circuit& c;
  const ParameterStore& params;
  const View& view;
  const Batch& batch;
  std::int32_t row = 0;
  std::vector<std::optional<S>> memo;
  // per (entry, resolved args) softmax cache for this row
  std::map<std::pair<std::int32_t, std::vector<ConstId>>, std::vector<S>> cat_cache;
  std::map<std::pair<std::int32_t, std::string>, std::vector<S>> perc_cache;

  S eval(std::int32_t n) {
    if (memo[n]) return *memo[n];
    const CircuitNode& nd = c.nodes[n];
    S out{};
    switch (nd.kind) {
      case CircuitNode::Kind::Const: out = S(c.consts[nd.a].a); break;
      case CircuitNode::Kind::Leaf: out = leaf_value(c.leaves[nd.a]); break;
      case CircuitNode::Kind::Transform: {
        const std::string& tname = c.transformations.at(nd.b);
        if (tname != "iverson") fail("naive evaluation supports only the iverson transform");
        out = eval(nd.a);
        break;
      }
      case CircuitNode::Kind::Op: {
        StructureKind skind = structure_by_name(c.structures.at(nd.sid)).kind;
        auto [ks, cnt] = c.node_kids(n);
        out = eval(ks[0]);
        if (nd.op == OpCode::Not) {
          out = S(1.0) - out;
        } else {
          for (std::int32_t i = 1; i < cnt; ++i) {
            S rhs = eval(ks[i]);
            out = apply(skind, nd.op, out, rhs);
          }
        }
        break;
      }
    }
    memo[n] = out;
    return out;
  }

  static S apply(StructureKind skind, OpCode op, S a, S b) {
    switch (skind) {
      case StructureKind::Probability:
      case StructureKind::Dual:
        return op == OpCode::Add ? a + b : a * b;
      case StructureKind::Boolean:
        return op == OpCode::Or ? fmax(a, b) : fmin(a, b);
      case StructureKind::FuzzyGodel:
        return op == OpCode::Or ? fmax(a, b) : fmin(a, b);
      case StructureKind::FuzzyLukasiewicz:
        return op == OpCode::Or ? one_ceiling(a + b) : relu_floor(a + b - S(1.0));
      case StructureKind::FuzzyProduct:
        return op == OpCode::Or ? a + b - a * b : a * b;
    }
    fail("unreachable");
  }

  std::vector<S> softmax(std::vector<S> logits) {
    S mx = logits[0];
    for (const S& l : logits) mx = fmax(mx, l);
    S total = S(0.0);
    for (S& l : logits) {
      l = exp(l - mx);
      total = total + l;
    }
    for (S& l : logits) l = l / total;
    return logits;
  }

  S leaf_value(const LeafRef& lr) {
    const LabelEntry& e = m.labelling.entries.at(lr.entry);
    std::vector<ConstId> group_args;
    std::string payload_key;
    for (std::size_t i = 0; i < lr.atom.args.size(); ++i) {
      if (static_cast<int>(i) == e.class_arg) continue;
      const ArgRef& a = lr.atom.args[i];
      if (!a.is_slot) {
        group_args.push_back(a.value);
        payload_key += "c" + std::to_string(a.value);
      } else {
        const SlotData& sd = batch.slots.at(a.value);
        if (sd.constants) {
          group_args.push_back(sd.constants->at(row));
          payload_key += "c" + std::to_string(sd.constants->at(row));
        } else {
          group_args.push_back(-1);
          payload_key += "s" + std::to_string(a.value);
        }
      }
    }
    switch (e.kind) {
      case LabelKind::Identity:
        fail("identity labelling has no score producer at circuit evaluation time");
      case LabelKind::Table: {
        std::pair<double, double> fl;
        if (e.uniform_p) fl = {1.0 - *e.uniform_p, *e.uniform_p};
        else {
          auto it = e.table.find(group_args);
          if (it == e.table.end()) fail("labelling lookup miss in naive evaluation");
          fl = it->second;
        }
        return S(lr.component == 1 ? fl.second : fl.first);
      }
      case LabelKind::Categorical: {
        auto key = std::make_pair(lr.entry, group_args);
        auto it = cat_cache.find(key);
        if (it == cat_cache.end()) {
          const ParamBlock* b = params.block_for_entry(lr.entry);
          const auto& cp = *b->categorical;
          auto inst = cp.instance_index.find(group_args);
          if (inst == cp.instance_index.end()) fail("unknown categorical instance");
          std::vector<S> logits;
          for (Eigen::Index k = 0; k < cp.logits.cols(); ++k)
            logits.push_back(view.param(&cp.logits(inst->second, k)));
          it = cat_cache.emplace(key, softmax(std::move(logits))).first;
        }
        return it->second[lr.component];
      }
      case LabelKind::Perceptual: {
        auto key = std::make_pair(lr.entry, payload_key);
        auto it = perc_cache.find(key);
        if (it == perc_cache.end()) {
          const ParamBlock* b = params.block_for_entry(lr.entry);
          const PerceptualParams& pp = *b->perceptual;
          // assemble the payload for this row
          std::vector<double> x;
          for (std::size_t i = 0, gi = 0; i < lr.atom.args.size(); ++i) {
            if (static_cast<int>(i) == e.class_arg) continue;
            const ArgRef& a = lr.atom.args[i];
            if (!a.is_slot || batch.slots.at(a.value).constants) {
              ConstId cid = group_args[gi];
              Eigen::VectorXd p = payload_of_constant(m, cid);
              for (Eigen::Index j = 0; j < p.size(); ++j) x.push_back(p(j));
            } else {
              const auto& pm = *batch.slots.at(a.value).payloads;
              for (Eigen::Index j = 0; j < pm.cols(); ++j) x.push_back(pm(row, j));
            }
            ++gi;
          }
          std::vector<S> logits;
          if (pp.w1.size() > 0) {
            std::vector<S> h;
            for (Eigen::Index r = 0; r < pp.w1.rows(); ++r) {
              S z = view.param(&pp.b1(r));
              for (Eigen::Index j = 0; j < pp.w1.cols(); ++j)
                z = z + view.param(&pp.w1(r, j)) * S(x[j]);
              h.push_back(tanh(z));
            }
            for (Eigen::Index r = 0; r < pp.w2.rows(); ++r) {
              S z = view.param(&pp.b2(r));
              for (Eigen::Index j = 0; j < pp.w2.cols(); ++j)
                z = z + view.param(&pp.w2(r, j)) * h[j];
              logits.push_back(z);
            }
          } else {
            for (Eigen::Index r = 0; r < pp.w2.rows(); ++r) {
              S z = view.param(&pp.b2(r));
              for (Eigen::Index j = 0; j < pp.w2.cols(); ++j)
                z = z + view.param(&pp.w2(r, j)) * S(x[j]);
              logits.push_back(z);
            }
          }
          it = perc_cache.emplace(key, softmax(std::move(logits))).first;
        }
        return it->second[lr.component];
      }
    }
    fail("unreachable");
  }
};

}  // namespace

Eigen::MatrixXd eval_naive(const Model& m, const Circuit& c, const ParameterStore& params,
                           const Batch& batch) {
  Eigen::MatrixXd out(batch.rows, static_cast<Eigen::Index>(c.roots.size()));
  DoubleView view;
  for (std::int32_t r = 0; r < batch.rows; ++r) {
    NaiveEvaluator<double, DoubleView> ev{m, c, params, view, batch, r, {}, {}, {}};
    ev.memo.assign(c.size(), std::nullopt);
    for (std::size_t i = 0; i < c.roots.size(); ++i)
      out(r, static_cast<Eigen::Index>(i)) = ev.eval(c.roots[i]);
  }
  return out;
}

Eigen::MatrixXd eval_dual_derivative(const Model& m, const Circuit& c,
                                     const ParameterStore& params, const Batch& batch,
                                     std::size_t param_index, Eigen::MatrixXd* primal) {
  Eigen::MatrixXd out(batch.rows, static_cast<Eigen::Index>(c.roots.size()));
  if (primal) primal->resize(batch.rows, static_cast<Eigen::Index>(c.roots.size()));
  DualView view{params.value_ptr(param_index)};
  for (std::int32_t r = 0; r < batch.rows; ++r) {
    NaiveEvaluator<Dual, DualView> ev{m, c, params, view, batch, r, {}, {}, {}};
    ev.memo.assign(c.size(), std::nullopt);
    for (std::size_t i = 0; i < c.roots.size(); ++i) {
      Dual d = ev.eval(c.roots[i]);
      out(r, static_cast<Eigen::Index>(i)) = d.dot;
      if (primal) (*primal)(r, static_cast<Eigen::Index>(i)) = d.val;
    }
  }
  return out;
}

Eigen::MatrixXd eval_expected_fuzzy(const Model& m, const Circuit& c, const Layerization& plan,
                                    const ParameterStore& params, const Batch& batch,
                                    const ExpectedFuzzyConfig& config) {
  if (config.samples < 1) fail("expected-fuzzy evaluation needs samples >= 1");
  if (config.dist == LeafDist::Dirac)
    return eval_forward(m, c, plan, params, batch);

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd acc;
  for (std::int32_t s = 0; s < config.samples; ++s) {
    LeafNoise noise;
    for (std::size_t g = 0; g < plan.leaf_groups.size(); ++g) {
      const LeafGroup& lg = plan.leaf_groups[g];
      if (config.dist == LeafDist::LogitNormal) {
        Eigen::MatrixXd eps(batch.rows, lg.classes);
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
        noise.logit_noise[static_cast<std::int32_t>(g)] = config.sigma * eps;
      } else {
        Eigen::MatrixXd draw(batch.rows, lg.classes);
        for (Eigen::Index i = 0; i < draw.size(); ++i) draw.data()[i] = unif(rng);
        noise.score_override[static_cast<std::int32_t>(g)] = std::move(draw);
      }
    }
    Eigen::MatrixXd v = eval_forward(m, c, plan, params, batch, nullptr, &noise);
    if (acc.size() == 0) acc = v;
    else acc += v;
  }
  return acc / static_cast<double>(config.samples);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("corrupt index: circuit file truncated");
  return v;
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
  auto n = read_pod<std::uint32_t>(is);
  if (n > (1u << 24)) fail("corrupt index: oversized string");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) fail("corrupt index: circuit file truncated");
  return s;
}

}  // namespace

void serialize(const Circuit& c, std::ostream& os) {
  os << "DLC1 " << c.nodes.size() << " " << c.structures.size() << "\n";
  write_string(os, c.name);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.structures.size()));
  for (const auto& s : c.structures) write_string(os, s);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.transformations.size()));
  for (const auto& s : c.transformations) write_string(os, s);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.slots.size()));
  for (const auto& s : c.slots) write_string(os, s);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.nodes.size()));
  for (const auto& n : c.nodes) {
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(n.kind));
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(n.op));
    write_pod<std::int32_t>(os, n.sid);
    write_pod<std::int32_t>(os, n.a);
    write_pod<std::int32_t>(os, n.b);
  }
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.kids.size()));
  for (std::int32_t k : c.kids) write_pod(os, k);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.leaves.size()));
  for (const auto& l : c.leaves) {
    write_pod<std::int32_t>(os, l.entry);
    write_pod<std::int32_t>(os, l.atom.pred);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(l.atom.args.size()));
    for (const auto& a : l.atom.args) {
      write_pod<std::uint8_t>(os, a.is_slot ? 1 : 0);
      write_pod<std::int32_t>(os, a.value);
    }
    write_pod<std::int32_t>(os, l.component);
  }
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.consts.size()));
  for (const auto& v : c.consts) {
    write_pod<std::uint8_t>(os, static_cast<std::uint8_t>(v.kind));
    write_pod<double>(os, v.a);
    write_pod<double>(os, v.b);
  }
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.roots.size()));
  for (std::int32_t r : c.roots) write_pod(os, r);
}

Circuit deserialize(std::istream& is) {
  std::string magic;
  std::size_t node_count = 0, struct_count = 0;
  is >> magic >> node_count >> struct_count;
  if (magic != "DLC1") fail("version mismatch: expected a DLC1 circuit file");
  is.get();
  Circuit c;
  c.name = read_string(is);
  auto ns = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < ns; ++i) c.structures.push_back(read_string(is));
  auto nt = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nt; ++i) c.transformations.push_back(read_string(is));
  auto nsl = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nsl; ++i) c.slots.push_back(read_string(is));
  auto nn = read_pod<std::uint32_t>(is);
  if (nn != node_count || ns != struct_count) fail("corrupt index: header disagrees with body");
  for (std::uint32_t i = 0; i < nn; ++i) {
    CircuitNode n;
    n.kind = static_cast<CircuitNode::Kind>(read_pod<std::uint8_t>(is));
    n.op = static_cast<OpCode>(read_pod<std::uint8_t>(is));
    n.sid = read_pod<std::int32_t>(is);
    n.a = read_pod<std::int32_t>(is);
    n.b = read_pod<std::int32_t>(is);
    c.nodes.push_back(n);
  }
  auto nk = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nk; ++i) c.kids.push_back(read_pod<std::int32_t>(is));
  auto nl = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nl; ++i) {
    LeafRef l;
    l.entry = read_pod<std::int32_t>(is);
    l.atom.pred = read_pod<std::int32_t>(is);
    auto na = read_pod<std::uint32_t>(is);
    for (std::uint32_t j = 0; j < na; ++j) {
      ArgRef a;
      a.is_slot = read_pod<std::uint8_t>(is) != 0;
      a.value = read_pod<std::int32_t>(is);
      l.atom.args.push_back(a);
    }
    l.component = read_pod<std::int32_t>(is);
    c.leaves.push_back(std::move(l));
  }
  auto nc = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nc; ++i) {
    Value v;
    v.kind = static_cast<ValueKind>(read_pod<std::uint8_t>(is));
    v.a = read_pod<double>(is);
    v.b = read_pod<double>(is);
    c.consts.push_back(v);
  }
  auto nr = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nr; ++i) c.roots.push_back(read_pod<std::int32_t>(is));

  // structural validation
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    const CircuitNode& n = c.nodes[i];
    switch (n.kind) {
      case CircuitNode::Kind::Op:
        if (n.a < 0 || n.a + n.b > static_cast<std::int32_t>(c.kids.size()))
          fail("corrupt index: kid range out of bounds");
        for (std::int32_t j = 0; j < n.b; ++j)
          if (c.kids[n.a + j] >= static_cast<std::int32_t>(i) || c.kids[n.a + j] < 0)
            fail("corrupt index: child does not precede parent");
        break;
      case CircuitNode::Kind::Transform:
        if (n.a < 0 || n.a >= static_cast<std::int32_t>(i))
          fail("corrupt index: child does not precede parent");
        break;
      case CircuitNode::Kind::Leaf:
        if (n.a < 0 || n.a >= static_cast<std::int32_t>(c.leaves.size()))
          fail("corrupt index: leaf reference out of bounds");
        break;
      case CircuitNode::Kind::Const:
        if (n.a < 0 || n.a >= static_cast<std::int32_t>(c.consts.size()))
          fail("corrupt index: constant reference out of bounds");
        break;
    }
  }
  for (std::int32_t r : c.roots)
    if (r < 0 || r >= static_cast<std::int32_t>(c.nodes.size()))
      fail("corrupt index: root out of bounds");
  return c;
}

void save_circuit_file(const std::string& path, const Model& m, const Circuit& c,
                       const ParameterStore* params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot write '" + path + "'");
  std::string model_text = print_model(m);
  os << "DLCF\n";
  write_string(os, model_text);
  serialize(c, os);
  write_pod<std::uint8_t>(os, params ? 1 : 0);
  if (params) params->save(os);
}

CircuitFile load_circuit_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot read '" + path + "'");
  std::string magic(4, '\0');
  is.read(magic.data(), 4);
  if (magic != "DLCF") fail("version mismatch: expected a DLCF bundle");
  is.get();
  CircuitFile out;
  std::string model_text = read_string(is);
  out.model = parse_model_or_throw(model_text);
  out.circuit = deserialize(is);
  out.has_params = read_pod<std::uint8_t>(is) != 0;
  if (out.has_params) out.params = ParameterStore::load(is, out.model);
  else out.params = ParameterStore(out.model, 0);
  return out;
}

}  // namespace deeplog
