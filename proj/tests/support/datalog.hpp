#pragma once

// Independent bottom-up fixpoint evaluator used to cross-check SLD proof
// enumeration. Deliberately shares no code with the prover: its own matching
// and arithmetic over ground terms.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "deeplog/program.hpp"

namespace deeplog::testing {

using Binding = std::map<std::string, PTerm>;

inline PTerm apply_binding(const PTerm& t, const Binding& b) {
  if (t.kind == PTerm::Kind::Var) {
    auto it = b.find(t.name);
    return it != b.end() ? it->second : t;
  }
  PTerm out = t;
  for (auto& a : out.args) a = apply_binding(a, b);
  return out;
}

inline bool match_term(const PTerm& pattern, const PTerm& ground, Binding& b) {
  if (pattern.kind == PTerm::Kind::Var) {
    auto it = b.find(pattern.name);
    if (it != b.end()) return it->second == ground;
    b[pattern.name] = ground;
    return true;
  }
  if (pattern.kind != ground.kind) return false;
  switch (pattern.kind) {
    case PTerm::Kind::Sym: return pattern.name == ground.name;
    case PTerm::Kind::Int: return pattern.num == ground.num;
    case PTerm::Kind::Nil: return true;
    case PTerm::Kind::Cons:
    case PTerm::Kind::Fn:
      if (pattern.kind == PTerm::Kind::Fn &&
          (pattern.name != ground.name || pattern.args.size() != ground.args.size()))
        return false;
      for (std::size_t i = 0; i < pattern.args.size(); ++i)
        if (!match_term(pattern.args[i], ground.args[i], b)) return false;
      return true;
    default: return false;
  }
}

inline long long eval_ground(const PTerm& t) {
  if (t.kind == PTerm::Kind::Int) return t.num;
  if (t.kind != PTerm::Kind::Fn) throw std::runtime_error("non-arithmetic term");
  long long a = eval_ground(t.args[0]);
  long long c = eval_ground(t.args[1]);
  if (t.name == "+") return a + c;
  if (t.name == "-") return a - c;
  if (t.name == "*") return a * c;
  if (t.name == "mod") {
    long long r = a % c;
    return r < 0 ? r + std::abs(c) : r;
  }
  if (t.name == "div") {
    long long q = a / c;
    if ((a % c != 0) && ((a < 0) != (c < 0))) --q;
    return q;
  }
  if (t.name == "**") {
    long long r = 1;
    for (long long i = 0; i < c; ++i) r *= a;
    return r;
  }
  throw std::runtime_error("bad arithmetic");
}

struct FactStore {
  std::map<std::string, std::vector<std::vector<PTerm>>> by_pred;
  std::set<std::string> keys;

  bool insert(const std::string& pred, std::vector<PTerm> args) {
    std::string key = pred;
    for (const auto& a : args) key += "|" + a.str();
    if (!keys.insert(key).second) return false;
    by_pred[pred].push_back(std::move(args));
    return true;
  }
  bool contains(const std::string& pred, const std::vector<PTerm>& args) const {
    std::string key = pred;
    for (const auto& a : args) key += "|" + a.str();
    return keys.count(key) > 0;
  }
};

/// True when `query` is in the minimal model of the program given that
/// exactly the facts in `positive` (instances of annotated predicates) hold.
inline bool bottom_up_entails(const Program& p,
                              const std::vector<std::pair<std::string, std::vector<PTerm>>>& positive,
                              const PLiteral& query) {
  FactStore facts;
  std::set<std::string> annotated;
  for (const auto& c : p.clauses)
    if (c.annotation) annotated.insert(c.head.pred);
  for (const auto& [pred, args] : positive) facts.insert(pred, args);

  auto is_positive_fact = [&](const std::string& pred, const std::vector<PTerm>& args) {
    return facts.contains(pred, args);
  };

  bool changed = true;
  int iterations = 0;
  while (changed) {
    if (++iterations > 10000) throw std::runtime_error("fixpoint guard");
    changed = false;
    for (const auto& c : p.clauses) {
      if (c.annotation) continue;
      // enumerate bindings satisfying the body left to right
      std::vector<Binding> frontier{Binding{}};
      for (const auto& lit : c.body) {
        std::vector<Binding> next;
        for (const auto& b : frontier) {
          if (lit.pred == "between") {
            long long lo = eval_ground(apply_binding(lit.args[0], b));
            long long hi = eval_ground(apply_binding(lit.args[1], b));
            PTerm x = apply_binding(lit.args[2], b);
            if (x.kind == PTerm::Kind::Var) {
              for (long long v = lo; v <= hi; ++v) {
                Binding nb = b;
                nb[x.name] = PTerm::integer(v);
                next.push_back(std::move(nb));
              }
            } else if (x.kind == PTerm::Kind::Int && lo <= x.num && x.num <= hi) {
              next.push_back(b);
            }
            continue;
          }
          if (lit.pred == "is") {
            long long v = eval_ground(apply_binding(lit.args[1], b));
            PTerm x = apply_binding(lit.args[0], b);
            if (x.kind == PTerm::Kind::Var) {
              Binding nb = b;
              nb[x.name] = PTerm::integer(v);
              next.push_back(std::move(nb));
            } else if (x.kind == PTerm::Kind::Int && x.num == v) {
              next.push_back(b);
            }
            continue;
          }
          if (lit.pred == "length") {
            PTerm l = apply_binding(lit.args[0], b);
            long long n = 0;
            const PTerm* q = &l;
            while (q->kind == PTerm::Kind::Cons) {
              ++n;
              q = &q->args[1];
            }
            if (q->kind != PTerm::Kind::Nil) continue;
            PTerm x = apply_binding(lit.args[1], b);
            if (x.kind == PTerm::Kind::Var) {
              Binding nb = b;
              nb[x.name] = PTerm::integer(n);
              next.push_back(std::move(nb));
            } else if (x.kind == PTerm::Kind::Int && x.num == n) {
              next.push_back(b);
            }
            continue;
          }
          if (lit.negated) {
            std::vector<PTerm> args;
            bool ground = true;
            for (const auto& a : lit.args) {
              PTerm g = apply_binding(a, b);
              args.push_back(g);
              std::function<void(const PTerm&)> chk = [&](const PTerm& t) {
                if (t.kind == PTerm::Kind::Var) ground = false;
                for (const auto& s : t.args) chk(s);
              };
              chk(g);
            }
            if (ground && annotated.count(lit.pred) && !is_positive_fact(lit.pred, args))
              next.push_back(b);
            continue;
          }
          // ordinary literal: match against known facts
          auto it = facts.by_pred.find(lit.pred);
          if (it == facts.by_pred.end()) continue;
          for (const auto& fact_args : it->second) {
            if (fact_args.size() != lit.args.size()) continue;
            Binding nb = b;
            bool ok = true;
            for (std::size_t i = 0; ok && i < lit.args.size(); ++i)
              ok = match_term(apply_binding(lit.args[i], nb), fact_args[i], nb);
            if (ok) next.push_back(std::move(nb));
          }
        }
        frontier = std::move(next);
        if (frontier.empty()) break;
      }
      for (const auto& b : frontier) {
        std::vector<PTerm> head_args;
        for (const auto& a : c.head.args) head_args.push_back(apply_binding(a, b));
        if (facts.insert(c.head.pred, std::move(head_args))) changed = true;
      }
    }
  }
  return facts.contains(query.pred, query.args);
}

}  // namespace deeplog::testing
