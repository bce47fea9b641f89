#include "deeplog/oracle.hpp"

#include <algorithm>
#include <map>

namespace deeplog {

Value TableResolver::label(const Model& m, const GroundAtom& atom, StructId sid,
                           const Value& truth) const {
  const LabelEntry* e = m.labelling.find(atom.pred, sid);
  if (!e)
    fail("labelling lookup miss: " + print_ground_atom(m, atom) + " @ " + m.structures.at(sid));
  switch (e->kind) {
    case LabelKind::Identity: return truth;
    case LabelKind::Table: {
      std::pair<double, double> fl;
      if (e->uniform_p) {
        fl = {1.0 - *e->uniform_p, *e->uniform_p};
      } else {
        auto it = e->table.find(atom.args);
        if (it == e->table.end())
          fail("labelling lookup miss: no table entry for " + print_ground_atom(m, atom));
        fl = it->second;
      }
      return Value::real(truth.truthy() ? fl.second : fl.first);
    }
    case LabelKind::Categorical:
    case LabelKind::Perceptual:
      fail("parametric labelling for " + print_ground_atom(m, atom) +
           " needs a parameter store");
  }
  fail("unreachable");
}

namespace {

GroundAtom ground_of(const Model& m, const Atom& a) {
  GroundAtom g;
  g.pred = a.pred;
  g.args.reserve(a.args.size());
  for (const auto& t : a.args) {
    if (t.is_var) fail("atom " + print_atom(m, a) + " is not ground at evaluation time");
    g.args.push_back(t.constant);
  }
  return g;
}

struct EvalCtx {
  const Model& m;
  const LeafResolver& leaves;
  std::uint64_t interpretations = 0;
  std::uint64_t assignments = 0;
};

bool contains_kind(const FormulaPtr& f, Formula::Kind k) {
  if (!f) return false;
  if (f->kind == k) return true;
  switch (f->kind) {
    case Formula::Kind::Atom:
    case Formula::Kind::Const: return false;
    case Formula::Kind::Binary:
      return contains_kind(f->child, k) || contains_kind(f->rhs, k);
    default: return contains_kind(f->child, k);
  }
}

Value eval_rec(EvalCtx& ctx, const FormulaPtr& f, const Interpretation& interp) {
  const Model& m = ctx.m;
  switch (f->kind) {
    case Formula::Kind::Atom: {
      GroundAtom g = ground_of(m, f->atom);
      const LabelEntry* e = m.labelling.find(g.pred, f->sid);
      if (!e)
        fail("labelling lookup miss: " + print_ground_atom(m, g) + " @ " +
             m.structures.at(f->sid));
      if (!interp.has(g))
        fail("unassigned atom outside any binder: " + print_ground_atom(m, g));
      return ctx.leaves.label(m, g, f->sid, interp.at(g));
    }
    case Formula::Kind::Const: return f->constant;
    case Formula::Kind::Unary:
      return m.structure(f->sid).unary(f->op)(eval_rec(ctx, f->child, interp));
    case Formula::Kind::Binary: {
      Value l = eval_rec(ctx, f->child, interp);
      Value r = eval_rec(ctx, f->rhs, interp);
      return m.structure(f->sid).binary(f->op)(l, r);
    }
    case Formula::Kind::Transform: {
      Value c = eval_rec(ctx, f->child, interp);
      return m.transformations.at(f->transform).map(c);
    }
    case Formula::Kind::AggAtom: {
      if (interp.domain == TruthDomain::Fuzzy)
        fail("aggregation over a fuzzy-valued atom is not enumerable; "
             "use the sampled-expectation (probabilistic-fuzzy) mode instead");
      GroundAtom g = ground_of(m, f->atom);
      const Aggregator& agg = m.structure(f->sid).aggregator(f->op);
      bool innermost = !contains_kind(f->child, Formula::Kind::AggAtom);
      Value acc = agg.init;
      for (bool truth : {false, true}) {  // false-then-true enumeration
        Interpretation ext = interp.extend(g, Value::boolean(truth));
        if (innermost) ++ctx.interpretations;
        acc = agg.step(acc, eval_rec(ctx, f->child, ext));
      }
      return acc;
    }
    case Formula::Kind::AggVar: {
      const Aggregator& agg = m.structure(f->sid).aggregator(f->op);
      bool innermost = !contains_kind(f->child, Formula::Kind::AggVar);
      Value acc = agg.init;
      for (ConstId c : m.domains.at(f->var_domain).members) {
        if (innermost) ++ctx.assignments;
        FormulaPtr inst = substitute(m, f->child, VariableAssignment{{f->var, c}});
        acc = agg.step(acc, eval_rec(ctx, inst, interp));
      }
      return acc;
    }
  }
  fail("unreachable");
}

}  // namespace

OracleResult evaluate(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma,
                      const Interpretation& interp, const LeafResolver& leaves) {
  FormulaPtr ground = substitute(m, f, sigma);
  EvalCtx ctx{m, leaves};
  Value v = eval_rec(ctx, ground, interp);
  return OracleResult{v, ctx.interpretations, ctx.assignments};
}

OracleResult evaluate(const Model& m, const FormulaPtr& f, const VariableAssignment& sigma,
                      const Interpretation& interp) {
  TableResolver tables;
  return evaluate(m, f, sigma, interp, tables);
}

bool eval_boolean(const Model& m, const FormulaPtr& logic, const Interpretation& interp) {
  switch (logic->kind) {
    case Formula::Kind::Atom: {
      if (m.structure(logic->sid).value_kind != ValueKind::Boolean)
        fail("non-Boolean node encountered in a logic formula");
      GroundAtom g = ground_of(m, logic->atom);
      if (!interp.has(g)) fail("unassigned atom: " + print_ground_atom(m, g));
      return interp.at(g).truthy();
    }
    case Formula::Kind::Const:
      if (logic->constant.kind != ValueKind::Boolean)
        fail("non-Boolean node encountered in a logic formula");
      return logic->constant.truthy();
    case Formula::Kind::Unary:
      if (logic->op != "not") fail("non-Boolean node encountered in a logic formula");
      return !eval_boolean(m, logic->child, interp);
    case Formula::Kind::Binary: {
      if (logic->op == "and")
        return eval_boolean(m, logic->child, interp) && eval_boolean(m, logic->rhs, interp);
      if (logic->op == "or")
        return eval_boolean(m, logic->child, interp) || eval_boolean(m, logic->rhs, interp);
      fail("non-Boolean node encountered in a logic formula");
    }
    default: fail("non-Boolean node encountered in a logic formula");
  }
}

namespace {

void collect_atoms_rec(const Model& m, const FormulaPtr& f, std::set<GroundAtom>& out) {
  switch (f->kind) {
    case Formula::Kind::Atom: out.insert(ground_of(m, f->atom)); break;
    case Formula::Kind::Const: break;
    case Formula::Kind::Binary:
      collect_atoms_rec(m, f->child, out);
      collect_atoms_rec(m, f->rhs, out);
      break;
    case Formula::Kind::AggAtom:
      collect_atoms_rec(m, f->child, out);
      break;
    default:
      if (f->child) collect_atoms_rec(m, f->child, out);
      break;
  }
}

}  // namespace

std::vector<GroundAtom> collect_ground_atoms(const Model& m, const FormulaPtr& f) {
  std::set<GroundAtom> set;
  collect_atoms_rec(m, f, set);
  // Herbrand-base order: predicate declaration order, then domain order.
  std::map<GroundAtom, std::size_t> rank;
  std::size_t i = 0;
  for (const auto& g : herbrand_base(m)) rank[g] = i++;
  std::vector<GroundAtom> out(set.begin(), set.end());
  std::sort(out.begin(), out.end(), [&](const GroundAtom& a, const GroundAtom& b) {
    auto ia = rank.find(a), ib = rank.find(b);
    if (ia == rank.end() || ib == rank.end()) return a < b;
    return ia->second < ib->second;
  });
  return out;
}

double brute_force_wmc(const Model& m, const FormulaPtr& logic, const WeightFn& weights) {
  std::vector<GroundAtom> atoms = collect_ground_atoms(m, logic);
  if (atoms.size() > 24) fail("brute-force enumeration guard: more than 24 atoms");
  const std::size_t n = atoms.size();
  double sum = 0.0;
  // Odometer over truth values, last atom fastest, false-then-true: this is
  // the same summation order as the nested aggregation semantics.
  for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
    Interpretation interp;
    interp.domain = TruthDomain::Boolean;
    double w = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      bool truth = (bits >> (n - 1 - i)) & 1ULL;
      interp.values[atoms[i]] = Value::boolean(truth);
      w *= weights(atoms[i], truth);
    }
    if (eval_boolean(m, logic, interp)) sum += w;
  }
  return sum;
}

WeightFn table_weights(const Model& m, StructId sid) {
  return [&m, sid](const GroundAtom& a, bool truth) {
    TableResolver tables;
    return tables.label(m, a, sid, Value::boolean(truth)).a;
  };
}

std::vector<Interpretation> enumerate_models(const Model& m, const FormulaPtr& logic,
                                             const std::vector<GroundAtom>& atoms) {
  if (atoms.size() > 24) fail("model enumeration guard: more than 24 atoms");
  const std::size_t n = atoms.size();
  std::vector<Interpretation> out;
  for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
    Interpretation interp;
    interp.domain = TruthDomain::Boolean;
    for (std::size_t i = 0; i < n; ++i) {
      // lexicographic in the atom list, true before false
      bool truth = ((bits >> (n - 1 - i)) & 1ULL) == 0;
      interp.values[atoms[i]] = Value::boolean(truth);
    }
    if (eval_boolean(m, logic, interp)) out.push_back(std::move(interp));
  }
  return out;
}

}  // namespace deeplog
