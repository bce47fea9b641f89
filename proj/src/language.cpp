#include "deeplog/language.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace deeplog {

const Value& Interpretation::at(const GroundAtom& a) const {
  auto it = values.find(a);
  if (it == values.end()) fail("interpretation does not assign the requested atom");
  return it->second;
}

Interpretation Interpretation::extend(const GroundAtom& a, const Value& v) const {
  Interpretation out = *this;
  out.values[a] = v;
  return out;
}

FormulaPtr f_atom(StructId sid, Atom a) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Atom;
  f->sid = sid;
  f->atom = std::move(a);
  return f;
}

FormulaPtr f_const(StructId sid, Value v) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Const;
  f->sid = sid;
  f->constant = v;
  return f;
}

FormulaPtr f_unary(StructId sid, std::string op, FormulaPtr c) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Unary;
  f->sid = sid;
  f->op = std::move(op);
  f->child = std::move(c);
  return f;
}

FormulaPtr f_binary(StructId sid, std::string op, FormulaPtr l, FormulaPtr r) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Binary;
  f->sid = sid;
  f->op = std::move(op);
  f->child = std::move(l);
  f->rhs = std::move(r);
  return f;
}

FormulaPtr f_agg_atom(StructId sid, Atom pattern, std::string agg, FormulaPtr c) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::AggAtom;
  f->sid = sid;
  f->atom = std::move(pattern);
  f->op = std::move(agg);
  f->child = std::move(c);
  return f;
}

FormulaPtr f_agg_var(StructId sid, std::string var, DomainId dom, std::string agg, FormulaPtr c) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::AggVar;
  f->sid = sid;
  f->var = std::move(var);
  f->var_domain = dom;
  f->op = std::move(agg);
  f->child = std::move(c);
  return f;
}

FormulaPtr f_transform(StructId sid, int transform, FormulaPtr c) {
  auto f = std::make_shared<Formula>();
  f->kind = Formula::Kind::Transform;
  f->sid = sid;
  f->transform = transform;
  f->child = std::move(c);
  return f;
}

bool formula_equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->sid != b->sid) return false;
  switch (a->kind) {
    case Formula::Kind::Atom: return a->atom == b->atom;
    case Formula::Kind::Const:
      return a->constant.kind == b->constant.kind && a->constant.a == b->constant.a &&
             a->constant.b == b->constant.b;
    case Formula::Kind::Unary:
      return a->op == b->op && formula_equal(a->child, b->child);
    case Formula::Kind::Binary:
      return a->op == b->op && formula_equal(a->child, b->child) && formula_equal(a->rhs, b->rhs);
    case Formula::Kind::AggAtom:
      return a->op == b->op && a->atom == b->atom && formula_equal(a->child, b->child);
    case Formula::Kind::AggVar:
      return a->op == b->op && a->var == b->var && a->var_domain == b->var_domain &&
             formula_equal(a->child, b->child);
    case Formula::Kind::Transform:
      return a->transform == b->transform && formula_equal(a->child, b->child);
  }
  return false;
}

bool atom_order_less(const Atom& a, const Atom& b) {
  if (a.pred != b.pred) return a.pred < b.pred;
  for (std::size_t i = 0; i < std::min(a.args.size(), b.args.size()); ++i) {
    const Term& x = a.args[i];
    const Term& y = b.args[i];
    if (x.is_var != y.is_var) return y.is_var;
    if (x.is_var) {
      if (x.var != y.var) return x.var < y.var;
    } else if (x.constant != y.constant) {
      return x.constant < y.constant;
    }
  }
  return a.args.size() < b.args.size();
}

bool LabelEntry::normalized() const {
  switch (kind) {
    case LabelKind::Categorical:
    case LabelKind::Perceptual:
      return true;  // softmax outputs
    case LabelKind::Table: {
      if (uniform_p) return true;
      for (const auto& [args, fl] : table)
        if (std::abs(fl.first + fl.second - 1.0) > 1e-9) return false;
      return !table.empty();
    }
    case LabelKind::Identity: return false;
  }
  return false;
}

const LabelEntry* LabellingSpec::find(PredId pred, StructId sid) const {
  for (const auto& e : entries)
    if (e.pred == pred && e.sid == sid) return &e;
  return nullptr;
}

LabelEntry* LabellingSpec::find(PredId pred, StructId sid) {
  for (auto& e : entries)
    if (e.pred == pred && e.sid == sid) return &e;
  return nullptr;
}

StructId Model::add_structure(const std::string& name) {
  auto it = structure_index.find(name);
  if (it != structure_index.end()) return it->second;
  structure_by_name(name);  // validates
  structures.push_back(name);
  StructId id = static_cast<StructId>(structures.size()) - 1;
  structure_index[name] = id;
  return id;
}

int Model::add_transformation(const Transformation& t) {
  auto it = transformation_index.find(t.name);
  if (it != transformation_index.end()) return it->second;
  transformations.push_back(t);
  int id = static_cast<int>(transformations.size()) - 1;
  transformation_index[t.name] = id;
  return id;
}

ConstId Model::add_constant(const std::string& symbol) {
  auto it = constant_index.find(symbol);
  if (it != constant_index.end()) return it->second;
  constants.push_back(ConstantInfo{symbol, std::nullopt});
  ConstId id = static_cast<ConstId>(constants.size()) - 1;
  constant_index[symbol] = id;
  return id;
}

DomainId Model::add_domain(const std::string& name) {
  auto it = domain_index.find(name);
  if (it != domain_index.end()) return it->second;
  domains.push_back(DomainInfo{name, {}});
  DomainId id = static_cast<DomainId>(domains.size()) - 1;
  domain_index[name] = id;
  return id;
}

PredId Model::add_predicate(PredicateSignature sig) {
  auto it = predicate_index.find(sig.name);
  if (it != predicate_index.end()) fail("duplicate predicate '" + sig.name + "'");
  predicates.push_back(std::move(sig));
  PredId id = static_cast<PredId>(predicates.size()) - 1;
  predicate_index[predicates.back().name] = id;
  return id;
}

StructId Model::structure_id(const std::string& name) const {
  auto it = structure_index.find(name);
  if (it == structure_index.end()) fail("model does not declare structure '" + name + "'");
  return it->second;
}

const AlgebraicStructure& Model::structure(StructId sid) const {
  return structure_by_name(structures.at(sid));
}

const NamedFormula& Model::formula(const std::string& name) const {
  auto it = formula_index.find(name);
  if (it == formula_index.end()) fail("unknown formula '" + name + "'");
  return formulas[it->second];
}

bool Model::in_domain(DomainId dom, ConstId c) const {
  const auto& members = domains.at(dom).members;
  return std::find(members.begin(), members.end(), c) != members.end();
}

namespace {

// Positions of a variable are typed by the predicate signature; substitution
// must respect every position it occupies.
void check_arg_domain(const Model& m, const Atom& a, std::size_t pos, ConstId c) {
  const auto& sig = m.predicates.at(a.pred);
  DomainId dom = sig.domains.at(pos);
  if (!m.in_domain(dom, c))
    fail("constant '" + m.const_name(c) + "' outside domain '" + m.domains[dom].name +
         "' at position " + std::to_string(pos + 1) + " of " + sig.name);
}

Atom substitute_atom(const Model& m, const Atom& a, const VariableAssignment& sigma,
                     const std::set<std::string>& bound) {
  Atom out = a;
  for (std::size_t i = 0; i < out.args.size(); ++i) {
    auto& t = out.args[i];
    if (!t.is_var || bound.count(t.var)) continue;
    auto it = sigma.find(t.var);
    if (it == sigma.end()) fail("unassigned free variable '" + t.var + "'");
    check_arg_domain(m, a, i, it->second);
    t = Term::make_const(it->second);
  }
  return out;
}

FormulaPtr substitute_rec(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma,
                          std::set<std::string>& bound) {
  switch (f->kind) {
    case Formula::Kind::Atom:
      return f_atom(f->sid, substitute_atom(m, f->atom, sigma, bound));
    case Formula::Kind::Const: return f;
    case Formula::Kind::Unary:
      return f_unary(f->sid, f->op, substitute_rec(m, f->child, sigma, bound));
    case Formula::Kind::Binary:
      return f_binary(f->sid, f->op, substitute_rec(m, f->child, sigma, bound),
                      substitute_rec(m, f->rhs, sigma, bound));
    case Formula::Kind::AggAtom:
      return f_agg_atom(f->sid, substitute_atom(m, f->atom, sigma, bound), f->op,
                        substitute_rec(m, f->child, sigma, bound));
    case Formula::Kind::AggVar: {
      bool fresh = bound.insert(f->var).second;
      auto c = substitute_rec(m, f->child, sigma, bound);
      if (fresh) bound.erase(f->var);
      return f_agg_var(f->sid, f->var, f->var_domain, f->op, std::move(c));
    }
    case Formula::Kind::Transform:
      return f_transform(f->sid, f->transform, substitute_rec(m, f->child, sigma, bound));
  }
  fail("unreachable");
}

}  // namespace

FormulaPtr substitute(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma) {
  std::set<std::string> bound;
  return substitute_rec(m, f, sigma, bound);
}

namespace {

void free_vars_rec(const FormulaPtr& f, std::set<std::string>& bound,
                   std::vector<std::string>& out, std::set<std::string>& seen) {
  auto visit_atom = [&](const Atom& a) {
    for (const auto& t : a.args) {
      if (t.is_var && !bound.count(t.var) && seen.insert(t.var).second) out.push_back(t.var);
    }
  };
  switch (f->kind) {
    case Formula::Kind::Atom: visit_atom(f->atom); break;
    case Formula::Kind::Const: break;
    case Formula::Kind::Unary:
    case Formula::Kind::Transform: free_vars_rec(f->child, bound, out, seen); break;
    case Formula::Kind::Binary:
      free_vars_rec(f->child, bound, out, seen);
      free_vars_rec(f->rhs, bound, out, seen);
      break;
    case Formula::Kind::AggAtom:
      visit_atom(f->atom);
      free_vars_rec(f->child, bound, out, seen);
      break;
    case Formula::Kind::AggVar: {
      bool fresh = bound.insert(f->var).second;
      free_vars_rec(f->child, bound, out, seen);
      if (fresh) bound.erase(f->var);
      break;
    }
  }
}

}  // namespace

std::vector<std::string> free_variables(const FormulaPtr& f) {
  std::vector<std::string> out;
  std::set<std::string> bound, seen;
  free_vars_rec(f, bound, out, seen);
  return out;
}

namespace {

bool atom_occurs(const FormulaPtr& f, const Atom& a) {
  if (!f) return false;
  switch (f->kind) {
    case Formula::Kind::Atom: return f->atom == a;
    case Formula::Kind::Const: return false;
    case Formula::Kind::Unary:
    case Formula::Kind::Transform: return atom_occurs(f->child, a);
    case Formula::Kind::Binary: return atom_occurs(f->child, a) || atom_occurs(f->rhs, a);
    case Formula::Kind::AggAtom: return atom_occurs(f->child, a);
    case Formula::Kind::AggVar: return atom_occurs(f->child, a);
  }
  return false;
}

void check_formula(const Model& m, const NamedFormula& nf, const FormulaPtr& f,
                   std::vector<Diagnostic>& out,
                   std::map<std::string, DomainId>& var_domains) {
  auto error = [&](const std::string& msg) {
    out.push_back({Diagnostic::Severity::Error, "formula " + nf.name + ": " + msg, 0, 0});
  };
  auto warning = [&](const std::string& msg) {
    out.push_back({Diagnostic::Severity::Warning, "formula " + nf.name + ": " + msg, 0, 0});
  };

  auto visit_atom = [&](const Atom& a) {
    const auto& sig = m.predicates.at(a.pred);
    if (a.args.size() != sig.arity())
      error("arity mismatch for " + sig.name);
    for (std::size_t i = 0; i < a.args.size() && i < sig.domains.size(); ++i) {
      const auto& t = a.args[i];
      if (t.is_var) {
        auto [it, fresh] = var_domains.try_emplace(t.var, sig.domains[i]);
        if (!fresh && it->second != sig.domains[i])
          error("variable " + t.var + " occurs in positions with conflicting domains");
      } else if (!m.in_domain(sig.domains[i], t.constant)) {
        error("constant '" + m.const_name(t.constant) + "' outside domain of " + sig.name);
      }
    }
  };

  switch (f->kind) {
    case Formula::Kind::Atom: {
      visit_atom(f->atom);
      if (!m.labelling.find(f->atom.pred, f->sid))
        error("no labelling for " + m.predicates.at(f->atom.pred).name + " @ " +
              m.structures.at(f->sid));
      break;
    }
    case Formula::Kind::Const: break;
    case Formula::Kind::Unary: {
      if (!m.structure(f->sid).has_unary(f->op))
        error("structure " + m.structures.at(f->sid) + " lacks unary '" + f->op + "'");
      if (f->child->sid != f->sid) error("unary child structure mismatch");
      check_formula(m, nf, f->child, out, var_domains);
      break;
    }
    case Formula::Kind::Binary: {
      if (!m.structure(f->sid).has_binary(f->op))
        error("structure " + m.structures.at(f->sid) + " lacks binary '" + f->op + "'");
      if (f->child->sid != f->sid || f->rhs->sid != f->sid)
        error("binary children structure mismatch");
      check_formula(m, nf, f->child, out, var_domains);
      check_formula(m, nf, f->rhs, out, var_domains);
      break;
    }
    case Formula::Kind::AggAtom: {
      visit_atom(f->atom);
      if (m.structure(f->sid).aggregators.count(f->op) == 0)
        error("structure " + m.structures.at(f->sid) + " lacks aggregator '" + f->op + "'");
      if (f->child->sid != f->sid) error("aggregation child structure mismatch");
      if (!atom_occurs(f->child, f->atom))
        warning("vacuous aggregation: pattern " + print_atom(m, f->atom) +
                " does not occur in the aggregation body");
      check_formula(m, nf, f->child, out, var_domains);
      break;
    }
    case Formula::Kind::AggVar: {
      if (m.structure(f->sid).aggregators.count(f->op) == 0)
        error("structure " + m.structures.at(f->sid) + " lacks aggregator '" + f->op + "'");
      if (f->child->sid != f->sid) error("aggregation child structure mismatch");
      auto [it, fresh] = var_domains.try_emplace(f->var, f->var_domain);
      if (!fresh && it->second != f->var_domain)
        error("variable " + f->var + " occurs in positions with conflicting domains");
      check_formula(m, nf, f->child, out, var_domains);
      break;
    }
    case Formula::Kind::Transform: {
      if (f->transform < 0 || f->transform >= static_cast<int>(m.transformations.size())) {
        error("unknown transformation");
        break;
      }
      const auto& t = m.transformations[f->transform];
      if (m.structures.at(f->sid) != t.target)
        error("transformation direction mismatch: node is " + m.structures.at(f->sid) +
              ", transformation targets " + t.target);
      if (m.structures.at(f->child->sid) != t.source)
        error("transformation direction mismatch: child is " + m.structures.at(f->child->sid) +
              ", transformation expects " + t.source);
      check_formula(m, nf, f->child, out, var_domains);
      break;
    }
  }
}

}  // namespace

std::vector<Diagnostic> check_well_formed(const Model& m) {
  std::vector<Diagnostic> out;
  for (const auto& e : m.labelling.entries) {
    if (e.pred < 0 || e.pred >= static_cast<PredId>(m.predicates.size()))
      out.push_back({Diagnostic::Severity::Error, "labelling names an unknown predicate", 0, 0});
    if (e.kind == LabelKind::Identity) {
      const auto& st = m.structure(e.sid);
      bool ok = (m.truth == TruthDomain::Boolean && st.value_kind == ValueKind::Boolean) ||
                (m.truth == TruthDomain::Fuzzy && st.value_kind == ValueKind::Fuzzy);
      if (!ok)
        out.push_back({Diagnostic::Severity::Error,
                       "identity labelling on " + m.structures.at(e.sid) +
                           " does not match the declared truth domain",
                       0, 0});
    }
  }
  for (const auto& nf : m.formulas) {
    std::map<std::string, DomainId> var_domains;
    for (const auto& [v, d] : nf.params) var_domains[v] = d;
    check_formula(m, nf, nf.body, out, var_domains);
    for (const auto& v : free_variables(nf.body)) {
      bool declared = false;
      for (const auto& [p, d] : nf.params) declared |= (p == v);
      if (!declared)
        out.push_back({Diagnostic::Severity::Error,
                       "formula " + nf.name + ": free variable " + v + " is not a parameter", 0,
                       0});
    }
  }
  return out;
}

std::vector<GroundAtom> herbrand_base(const Model& m) {
  constexpr std::size_t kGuard = 10'000'000;
  std::size_t total = 0;
  for (const auto& sig : m.predicates) {
    std::size_t n = 1;
    for (DomainId d : sig.domains) n *= m.domains.at(d).members.size();
    total += n;
    if (total > kGuard) fail("herbrand base exceeds the 1e7 atom guard");
  }
  std::vector<GroundAtom> out;
  out.reserve(total);
  for (PredId p = 0; p < static_cast<PredId>(m.predicates.size()); ++p) {
    const auto& sig = m.predicates[p];
    std::vector<ConstId> args(sig.arity());
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
      if (pos == sig.arity()) {
        out.push_back(GroundAtom{p, args});
        return;
      }
      for (ConstId c : m.domains.at(sig.domains[pos]).members) {
        args[pos] = c;
        rec(pos + 1);
      }
    };
    rec(0);
  }
  return out;
}

std::string print_atom(const Model& m, const Atom& a) {
  std::ostringstream os;
  os << m.predicates.at(a.pred).name;
  if (!a.args.empty()) {
    os << "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i) os << ", ";
      os << (a.args[i].is_var ? a.args[i].var : m.const_name(a.args[i].constant));
    }
    os << ")";
  }
  return os.str();
}

std::string print_ground_atom(const Model& m, const GroundAtom& a) {
  Atom at;
  at.pred = a.pred;
  for (ConstId c : a.args) at.args.push_back(Term::make_const(c));
  return print_atom(m, at);
}

namespace {

std::string print_formula_rec(const Model& m, const FormulaPtr& f) {
  switch (f->kind) {
    case Formula::Kind::Atom:
      return print_atom(m, f->atom) + "@" + m.structures.at(f->sid);
    case Formula::Kind::Const:
      return "const<" + m.structures.at(f->sid) + ">(" + f->constant.str() + ")";
    case Formula::Kind::Unary:
      return f->op + "<" + m.structures.at(f->sid) + ">(" + print_formula_rec(m, f->child) + ")";
    case Formula::Kind::Binary: {
      const std::string& op = f->op;
      std::string sym = op == "mul" ? " * " : op == "add" ? " + " : " " + op + " ";
      if (op == "and" || op == "or")
        return op + "<" + m.structures.at(f->sid) + ">(" + print_formula_rec(m, f->child) + ", " +
               print_formula_rec(m, f->rhs) + ")";
      return "(" + print_formula_rec(m, f->child) + sym + print_formula_rec(m, f->rhs) + ")";
    }
    case Formula::Kind::AggAtom:
      return f->op + "<" + print_atom(m, f->atom) + "> " + print_formula_rec(m, f->child);
    case Formula::Kind::AggVar:
      return f->op + "<" + f->var + " in " + m.domains.at(f->var_domain).name + "> " +
             print_formula_rec(m, f->child);
    case Formula::Kind::Transform:
      return "transform<" + m.structures.at(f->sid) + ", " +
             m.transformations.at(f->transform).name + ">(" + print_formula_rec(m, f->child) + ")";
  }
  return "?";
}

}  // namespace

std::string print_formula(const Model& m, const FormulaPtr& f) { return print_formula_rec(m, f); }

std::string print_model(const Model& m) {
  std::ostringstream os;
  os << "structure ";
  for (std::size_t i = 0; i < m.structures.size(); ++i) os << (i ? ", " : "") << m.structures[i];
  os << ".\n";
  for (const auto& d : m.domains) {
    os << "domain " << d.name << " = {";
    for (std::size_t i = 0; i < d.members.size(); ++i)
      os << (i ? ", " : "") << m.const_name(d.members[i]);
    os << "}.\n";
  }
  for (const auto& c : m.constants) {
    if (!c.payload) continue;
    os << "tensor " << c.symbol << " = [";
    for (Eigen::Index i = 0; i < c.payload->size(); ++i)
      os << (i ? ", " : "") << (*c.payload)(i);
    os << "].\n";
  }
  for (const auto& p : m.predicates) {
    os << "pred " << p.name;
    if (p.arity() > 0) {
      os << "(";
      for (std::size_t i = 0; i < p.domains.size(); ++i)
        os << (i ? ", " : "") << m.domains.at(p.domains[i]).name;
      os << ")";
    }
    os << ".\n";
  }
  os << "truth " << (m.truth == TruthDomain::Boolean ? "bool" : "fuzzy") << ".\n";
  for (const auto& e : m.labelling.entries) {
    os << "label " << m.predicates.at(e.pred).name << " @ " << m.structures.at(e.sid) << " : ";
    switch (e.kind) {
      case LabelKind::Identity: os << "identity"; break;
      case LabelKind::Table:
        os << "table(";
        if (e.uniform_p) {
          os << *e.uniform_p;
        } else {
          bool first = true;
          for (const auto& [args, fl] : e.table) {
            if (!first) os << ", ";
            first = false;
            os << print_ground_atom(m, GroundAtom{e.pred, args}) << "=[" << fl.first << ", "
               << fl.second << "]";
          }
        }
        os << ")";
        break;
      case LabelKind::Categorical:
        os << "categorical(class=" << (e.class_arg + 1) << ")";
        break;
      case LabelKind::Perceptual:
        os << "perceptual(dim=" << e.input_dim << ", hidden=" << e.hidden;
        if (e.class_arg >= 0) os << ", class=" << (e.class_arg + 1);
        os << ")";
        break;
    }
    os << ".\n";
  }
  for (const auto& nf : m.formulas) {
    os << "formula " << nf.name;
    if (!nf.params.empty()) {
      os << "(";
      for (std::size_t i = 0; i < nf.params.size(); ++i)
        os << (i ? ", " : "") << nf.params[i].first << ":" << m.domains.at(nf.params[i].second).name;
      os << ")";
    }
    os << " := " << print_formula_rec(m, nf.body) << ".\n";
  }
  return os.str();
}

namespace {

bool label_entry_equal(const LabelEntry& a, const LabelEntry& b) {
  if (a.pred != b.pred || a.sid != b.sid || a.kind != b.kind) return false;
  if (a.kind == LabelKind::Table) {
    if (a.uniform_p.has_value() != b.uniform_p.has_value()) return false;
    if (a.uniform_p && std::abs(*a.uniform_p - *b.uniform_p) > 1e-12) return false;
    if (a.table.size() != b.table.size()) return false;
    for (auto ia = a.table.begin(), ib = b.table.begin(); ia != a.table.end(); ++ia, ++ib) {
      if (ia->first != ib->first) return false;
      if (std::abs(ia->second.first - ib->second.first) > 1e-12 ||
          std::abs(ia->second.second - ib->second.second) > 1e-12)
        return false;
    }
  }
  return a.class_arg == b.class_arg && a.input_dim == b.input_dim && a.hidden == b.hidden;
}

}  // namespace

bool model_equal(const Model& a, const Model& b) {
  if (a.structures != b.structures) return false;
  if (a.truth != b.truth) return false;
  if (a.constants.size() != b.constants.size()) return false;
  for (std::size_t i = 0; i < a.constants.size(); ++i) {
    if (a.constants[i].symbol != b.constants[i].symbol) return false;
    const auto& pa = a.constants[i].payload;
    const auto& pb = b.constants[i].payload;
    if (pa.has_value() != pb.has_value()) return false;
    if (pa && (pa->size() != pb->size() || (*pa - *pb).cwiseAbs().maxCoeff() > 1e-12))
      return false;
  }
  if (a.domains.size() != b.domains.size()) return false;
  for (std::size_t i = 0; i < a.domains.size(); ++i)
    if (a.domains[i].name != b.domains[i].name || a.domains[i].members != b.domains[i].members)
      return false;
  if (a.predicates.size() != b.predicates.size()) return false;
  for (std::size_t i = 0; i < a.predicates.size(); ++i)
    if (a.predicates[i].name != b.predicates[i].name ||
        a.predicates[i].domains != b.predicates[i].domains)
      return false;
  if (a.labelling.entries.size() != b.labelling.entries.size()) return false;
  for (std::size_t i = 0; i < a.labelling.entries.size(); ++i)
    if (!label_entry_equal(a.labelling.entries[i], b.labelling.entries[i])) return false;
  if (a.formulas.size() != b.formulas.size()) return false;
  for (std::size_t i = 0; i < a.formulas.size(); ++i) {
    if (a.formulas[i].name != b.formulas[i].name) return false;
    if (a.formulas[i].params != b.formulas[i].params) return false;
    if (!formula_equal(a.formulas[i].body, b.formulas[i].body)) return false;
  }
  return true;
}

}  // namespace deeplog
