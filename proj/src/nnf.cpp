#include "deeplog/nnf.hpp"

#include <algorithm>
#include <functional>

namespace deeplog {

namespace {

std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t node_hash(const NnfNode& n) {
  std::uint64_t h = static_cast<std::uint64_t>(n.kind);
  h = hash_mix(h, static_cast<std::uint64_t>(n.var + 1));
  h = hash_mix(h, n.positive ? 1 : 2);
  for (NnfId k : n.kids) h = hash_mix(h, static_cast<std::uint64_t>(k));
  return h;
}

bool node_equal(const NnfNode& a, const NnfNode& b) {
  return a.kind == b.kind && a.var == b.var && a.positive == b.positive && a.kids == b.kids;
}

}  // namespace

NnfManager::NnfManager() {
  varset_index_[{}] = 0;
  varsets_.push_back({});
  NnfNode f;
  f.kind = NnfNode::Kind::False;
  nodes_.push_back(f);
  NnfNode t;
  t.kind = NnfNode::Kind::True;
  nodes_.push_back(t);
}

std::int32_t NnfManager::intern_varset(std::vector<std::int32_t> vs) {
  auto it = varset_index_.find(vs);
  if (it != varset_index_.end()) return it->second;
  std::int32_t id = static_cast<std::int32_t>(varsets_.size());
  varset_index_.emplace(vs, id);
  varsets_.push_back(std::move(vs));
  return id;
}

NnfId NnfManager::intern(NnfNode n) {
  std::uint64_t h = node_hash(n);
  auto& bucket = cons_[h];
  for (NnfId id : bucket)
    if (node_equal(nodes_[id], n)) return id;
  // varset: union of children / own literal
  if (n.kind == NnfNode::Kind::Lit) {
    n.varset = intern_varset({n.var});
  } else {
    std::vector<std::int32_t> u;
    for (NnfId k : n.kids) {
      const auto& vs = varsets_[nodes_[k].varset];
      std::vector<std::int32_t> merged;
      merged.reserve(u.size() + vs.size());
      std::set_union(u.begin(), u.end(), vs.begin(), vs.end(), std::back_inserter(merged));
      u = std::move(merged);
    }
    n.varset = intern_varset(std::move(u));
  }
  NnfId id = static_cast<NnfId>(nodes_.size());
  nodes_.push_back(std::move(n));
  bucket.push_back(id);
  return id;
}

NnfId NnfManager::lit(std::int32_t var, bool positive) {
  NnfNode n;
  n.kind = NnfNode::Kind::Lit;
  n.var = var;
  n.positive = positive;
  return intern(std::move(n));
}

NnfId NnfManager::mk_and(std::vector<NnfId> kids) {
  std::vector<NnfId> flat;
  for (NnfId k : kids) {
    if (k == kNnfFalse) return kNnfFalse;
    if (k == kNnfTrue) continue;
    if (nodes_[k].kind == NnfNode::Kind::And) {
      for (NnfId g : nodes_[k].kids) flat.push_back(g);
    } else {
      flat.push_back(k);
    }
  }
  std::sort(flat.begin(), flat.end());
  flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
  if (flat.empty()) return kNnfTrue;
  if (flat.size() == 1) return flat[0];
  NnfNode n;
  n.kind = NnfNode::Kind::And;
  n.kids = std::move(flat);
  return intern(std::move(n));
}

NnfId NnfManager::mk_or(std::vector<NnfId> kids) {
  std::vector<NnfId> flat;
  for (NnfId k : kids) {
    if (k == kNnfTrue) return kNnfTrue;
    if (k == kNnfFalse) continue;
    if (nodes_[k].kind == NnfNode::Kind::Or) {
      for (NnfId g : nodes_[k].kids) flat.push_back(g);
    } else {
      flat.push_back(k);
    }
  }
  std::sort(flat.begin(), flat.end());
  flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
  if (flat.empty()) return kNnfFalse;
  if (flat.size() == 1) return flat[0];
  NnfNode n;
  n.kind = NnfNode::Kind::Or;
  n.kids = std::move(flat);
  return intern(std::move(n));
}

NnfId NnfManager::negate(NnfId id) {
  const NnfNode& n = nodes_[id];
  switch (n.kind) {
    case NnfNode::Kind::False: return kNnfTrue;
    case NnfNode::Kind::True: return kNnfFalse;
    case NnfNode::Kind::Lit: return lit(n.var, !n.positive);
    case NnfNode::Kind::And: {
      std::vector<NnfId> kids = n.kids;
      for (auto& k : kids) k = negate(k);
      return mk_or(std::move(kids));
    }
    case NnfNode::Kind::Or: {
      std::vector<NnfId> kids = n.kids;
      for (auto& k : kids) k = negate(k);
      return mk_and(std::move(kids));
    }
  }
  fail("unreachable");
}

NnfId NnfManager::condition(NnfId id, std::int32_t var, bool value) {
  const NnfNode& n = nodes_[id];
  if (n.kind == NnfNode::Kind::False || n.kind == NnfNode::Kind::True) return id;
  const auto& vs = varsets_[n.varset];
  if (!std::binary_search(vs.begin(), vs.end(), var)) return id;
  std::uint64_t key = (static_cast<std::uint64_t>(id) << 32) |
                      (static_cast<std::uint64_t>(var) << 1) | (value ? 1ULL : 0ULL);
  auto it = condition_memo_.find(key);
  if (it != condition_memo_.end()) return it->second;
  NnfId out;
  switch (n.kind) {
    case NnfNode::Kind::Lit:
      out = (n.positive == value) ? kNnfTrue : kNnfFalse;
      break;
    case NnfNode::Kind::And: {
      std::vector<NnfId> kids = n.kids;
      for (auto& k : kids) k = condition(k, var, value);
      out = mk_and(std::move(kids));
      break;
    }
    case NnfNode::Kind::Or: {
      std::vector<NnfId> kids = n.kids;
      for (auto& k : kids) k = condition(k, var, value);
      out = mk_or(std::move(kids));
      break;
    }
    default: fail("unreachable");
  }
  condition_memo_.emplace(key, out);
  return out;
}

std::size_t NnfManager::reachable_size(NnfId root) const {
  std::vector<char> seen(nodes_.size(), 0);
  std::vector<NnfId> stack{root};
  std::size_t count = 0;
  while (!stack.empty()) {
    NnfId id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = 1;
    ++count;
    for (NnfId k : nodes_[id].kids) stack.push_back(k);
  }
  return count;
}

bool NnfManager::evaluate(NnfId id, const std::vector<char>& assignment) const {
  const NnfNode& n = nodes_[id];
  switch (n.kind) {
    case NnfNode::Kind::False: return false;
    case NnfNode::Kind::True: return true;
    case NnfNode::Kind::Lit: return assignment[n.var] ? n.positive : !n.positive;
    case NnfNode::Kind::And:
      for (NnfId k : n.kids)
        if (!evaluate(k, assignment)) return false;
      return true;
    case NnfNode::Kind::Or:
      for (NnfId k : n.kids)
        if (evaluate(k, assignment)) return true;
      return false;
  }
  return false;
}

namespace {

std::string atom_key(const Atom& a) {
  std::string key = std::to_string(a.pred);
  for (const auto& t : a.args) {
    key += t.is_var ? "|v" + t.var : "|c" + std::to_string(t.constant);
  }
  return key;
}

struct Translator {
  const Model& m;
  BoolNnf& out;
  std::map<std::string, std::int32_t> index;

  std::int32_t var_of(const Atom& a) {
    std::string key = atom_key(a);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    std::int32_t id = static_cast<std::int32_t>(out.var_atoms.size());
    out.var_atoms.push_back(a);
    out.var_occurrences.push_back(0);
    index.emplace(std::move(key), id);
    return id;
  }

  NnfId translate(const FormulaPtr& f, bool positive) {
    if (m.structure(f->sid).value_kind != ValueKind::Boolean)
      fail("non-Boolean node encountered in to_nnf");
    switch (f->kind) {
      case Formula::Kind::Atom: {
        std::int32_t v = var_of(f->atom);
        ++out.var_occurrences[v];
        return out.mgr.lit(v, positive);
      }
      case Formula::Kind::Const:
        return f->constant.truthy() == positive ? kNnfTrue : kNnfFalse;
      case Formula::Kind::Unary:
        if (f->op != "not") fail("non-Boolean operator '" + f->op + "' in to_nnf");
        return translate(f->child, !positive);
      case Formula::Kind::Binary: {
        bool is_and = (f->op == "and");
        if (!is_and && f->op != "or")
          fail("non-Boolean operator '" + f->op + "' in to_nnf");
        NnfId l = translate(f->child, positive);
        NnfId r = translate(f->rhs, positive);
        // De Morgan under an odd number of negations
        if (is_and == positive) return out.mgr.mk_and({l, r});
        return out.mgr.mk_or({l, r});
      }
      default: fail("non-Boolean node encountered in to_nnf");
    }
  }
};

}  // namespace

std::int32_t BoolNnf::var_of(const Model&, const Atom& a) {
  std::string key = atom_key(a);
  for (std::size_t i = 0; i < var_atoms.size(); ++i)
    if (atom_key(var_atoms[i]) == key) return static_cast<std::int32_t>(i);
  var_atoms.push_back(a);
  var_occurrences.push_back(0);
  return static_cast<std::int32_t>(var_atoms.size()) - 1;
}

BoolNnf to_nnf(const Model& m, const FormulaPtr& f) {
  BoolNnf out;
  Translator tr{m, out, {}};
  out.root = tr.translate(f, true);
  return out;
}

std::vector<std::int32_t> default_atom_order(const Model&, const BoolNnf& nnf) {
  std::vector<std::int32_t> order(nnf.var_atoms.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    if (nnf.var_occurrences[a] != nnf.var_occurrences[b])
      return nnf.var_occurrences[a] > nnf.var_occurrences[b];
    return atom_order_less(nnf.var_atoms[a], nnf.var_atoms[b]);
  });
  return order;
}

NnfId shannon_compile(BoolNnf& nnf, const std::vector<std::int32_t>& order) {
  NnfManager& M = nnf.mgr;
  std::vector<std::size_t> pos(nnf.var_atoms.size(), order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;

  std::unordered_map<NnfId, NnfId> memo;
  std::function<NnfId(NnfId)> rec = [&](NnfId f) -> NnfId {
    if (f == kNnfFalse || f == kNnfTrue) return f;
    auto it = memo.find(f);
    if (it != memo.end()) return it->second;
    if (M.size() > 1'000'000) fail("compilation size guard exceeded (1e6 nodes)");

    const auto& vs = M.vars(f);
    std::int32_t x = -1;
    std::size_t best = order.size() + 1;
    for (std::int32_t v : vs) {
      if (pos[v] < best) {
        best = pos[v];
        x = v;
      }
    }
    if (x < 0) fail("variable missing from the compilation order");

    auto branch = [&](bool value) -> NnfId {
      NnfId residual = M.condition(f, x, value);
      NnfId c = rec(residual);
      if (c == kNnfFalse) return kNnfFalse;
      std::vector<NnfId> kids{M.lit(x, value), c};
      // smoothing: mention every variable of f in both branches
      const auto& cv = M.vars(c);
      for (std::int32_t v : vs) {
        if (v == x) continue;
        if (!std::binary_search(cv.begin(), cv.end(), v))
          kids.push_back(M.mk_or({M.lit(v, true), M.lit(v, false)}));
      }
      return M.mk_and(std::move(kids));
    };

    NnfId t = branch(true);
    NnfId e = branch(false);
    NnfId r = M.mk_or({t, e});
    memo.emplace(f, r);
    return r;
  };
  return rec(nnf.root);
}

namespace {

bool contains_direct_lit(const NnfManager& M, NnfId node, std::int32_t var, bool positive) {
  const NnfNode& n = M.node(node);
  if (n.kind == NnfNode::Kind::Lit) return n.var == var && n.positive == positive;
  if (n.kind != NnfNode::Kind::And) return false;
  for (NnfId k : n.kids) {
    const NnfNode& kn = M.node(k);
    if (kn.kind == NnfNode::Kind::Lit && kn.var == var && kn.positive == positive) return true;
  }
  return false;
}

bool or_deterministic(const NnfManager& M, const NnfNode& n) {
  if (n.kids.size() <= 1) return true;
  // Shannon pattern: two branches holding complementary literals of one var
  if (n.kids.size() == 2) {
    const auto& vs = M.vars(n.kids[0]);
    for (std::int32_t v : vs) {
      if ((contains_direct_lit(M, n.kids[0], v, true) &&
           contains_direct_lit(M, n.kids[1], v, false)) ||
          (contains_direct_lit(M, n.kids[0], v, false) &&
           contains_direct_lit(M, n.kids[1], v, true)))
        return true;
    }
  }
  // fallback: enumerate models over the disjunction's atom set
  std::vector<std::int32_t> vars;
  for (NnfId k : n.kids) {
    const auto& vs = M.vars(k);
    std::vector<std::int32_t> merged;
    std::set_union(vars.begin(), vars.end(), vs.begin(), vs.end(),
                   std::back_inserter(merged));
    vars = std::move(merged);
  }
  if (vars.size() > 20) return false;  // beyond the enumeration budget: report false conservatively
  std::int32_t max_var = vars.empty() ? 0 : vars.back();
  std::vector<char> assignment(max_var + 1, 0);
  for (std::uint64_t bits = 0; bits < (1ULL << vars.size()); ++bits) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      assignment[vars[i]] = static_cast<char>((bits >> i) & 1ULL);
    int sat = 0;
    for (NnfId k : n.kids)
      if (M.evaluate(k, assignment) && ++sat > 1) return false;
  }
  return true;
}

}  // namespace

DdnnfReport check_d_dnnf(const NnfManager& mgr, NnfId root) {
  DdnnfReport report{true, true, true};
  std::vector<char> seen(mgr.size(), 0);
  std::vector<NnfId> stack{root};
  while (!stack.empty()) {
    NnfId id = stack.back();
    stack.pop_back();
    if (seen[id]) continue;
    seen[id] = 1;
    const NnfNode& n = mgr.node(id);
    for (NnfId k : n.kids) stack.push_back(k);
    if (n.kind == NnfNode::Kind::And) {
      std::size_t total = 0;
      for (NnfId k : n.kids) total += mgr.vars(k).size();
      if (total != mgr.vars(id).size()) report.decomposable = false;
    } else if (n.kind == NnfNode::Kind::Or) {
      std::int32_t vs0 = mgr.node(n.kids[0]).varset;
      for (NnfId k : n.kids)
        if (mgr.node(k).varset != vs0) report.smooth = false;
      if (!or_deterministic(mgr, n)) report.deterministic = false;
    }
  }
  return report;
}

double ddnnf_wmc(const NnfManager& mgr, NnfId root,
                 const std::vector<std::pair<double, double>>& weights) {
  std::unordered_map<NnfId, double> memo;
  std::function<double(NnfId)> rec = [&](NnfId id) -> double {
    if (id == kNnfFalse) return 0.0;
    if (id == kNnfTrue) return 1.0;
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const NnfNode& n = mgr.node(id);
    double v = 0.0;
    if (n.kind == NnfNode::Kind::Lit) {
      v = n.positive ? weights[n.var].second : weights[n.var].first;
    } else if (n.kind == NnfNode::Kind::And) {
      v = 1.0;
      for (NnfId k : n.kids) v *= rec(k);
    } else {
      for (NnfId k : n.kids) v += rec(k);
    }
    memo.emplace(id, v);
    return v;
  };
  return rec(root);
}

}  // namespace deeplog
