#include "deeplog/program.hpp"

#include "deeplog/compiler.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>
#include <functional>
#include <sstream>

#include "lexer.hpp"

namespace deeplog {

// ---------------------------------------------------------------------------
// Terms

PTerm PTerm::sym(std::string s) {
  PTerm t;
  t.kind = Kind::Sym;
  t.name = std::move(s);
  return t;
}
PTerm PTerm::integer(long long v) {
  PTerm t;
  t.kind = Kind::Int;
  t.num = v;
  return t;
}
PTerm PTerm::var(std::string v) {
  PTerm t;
  t.kind = Kind::Var;
  t.name = std::move(v);
  return t;
}
PTerm PTerm::nil() {
  PTerm t;
  t.kind = Kind::Nil;
  return t;
}
PTerm PTerm::cons(PTerm head, PTerm tail) {
  PTerm t;
  t.kind = Kind::Cons;
  t.args.push_back(std::move(head));
  t.args.push_back(std::move(tail));
  return t;
}
PTerm PTerm::fn(std::string functor, std::vector<PTerm> operands) {
  PTerm t;
  t.kind = Kind::Fn;
  t.name = std::move(functor);
  t.args = std::move(operands);
  return t;
}

bool PTerm::operator==(const PTerm& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Sym:
    case Kind::Var: return name == o.name;
    case Kind::Int: return num == o.num;
    case Kind::Nil: return true;
    case Kind::Cons: return args[0] == o.args[0] && args[1] == o.args[1];
    case Kind::Fn: return name == o.name && args == o.args;
  }
  return false;
}

std::string PTerm::str() const {
  switch (kind) {
    case Kind::Sym: return name;
    case Kind::Var: return name;
    case Kind::Int: return std::to_string(num);
    case Kind::Nil: return "[]";
    case Kind::Cons: {
      std::string s = "[" + args[0].str();
      const PTerm* t = &args[1];
      while (t->kind == Kind::Cons) {
        s += ", " + t->args[0].str();
        t = &t->args[1];
      }
      if (t->kind != Kind::Nil) s += " | " + t->str();
      return s + "]";
    }
    case Kind::Fn: {
      std::string s = name + "(";
      for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ", " : "") + args[i].str();
      return s + ")";
    }
  }
  return "?";
}

std::string PLiteral::str() const {
  std::string s = negated ? "not(" : "";
  s += pred;
  if (!args.empty()) {
    s += "(";
    for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ", " : "") + args[i].str();
    s += ")";
  }
  if (negated) s += ")";
  return s;
}

std::string ProofLiteral::str_args() const {
  std::string s;
  for (const auto& a : args) s += a.str() + ",";
  return s;
}

std::vector<const Clause*> Program::clauses_of(const std::string& pred) const {
  std::vector<const Clause*> out;
  for (const auto& c : clauses)
    if (c.head.pred == pred) out.push_back(&c);
  return out;
}

bool Program::annotated(const std::string& pred) const {
  for (const auto& c : clauses)
    if (c.head.pred == pred && c.annotation) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

class ProgramParser {
 public:
  explicit ProgramParser(const std::string& text) : cur_(Lexer(text).run()) {}

  Program run() {
    while (!cur_.at_end()) statement();
    validate();
    return std::move(program_);
  }

  PLiteral literal_only() {
    PLiteral lit = parse_literal();
    return lit;
  }

 private:
  void statement() {
    const Token& head = cur_.peek();
    if (head.kind == Tok::Ident && head.text == "domain" && cur_.peek(1).kind == Tok::Ident)
      return parse_domain();
    if (head.kind == Tok::Ident && head.text == "pred" && cur_.peek(1).kind == Tok::Ident)
      return parse_pred();
    parse_clause();
  }

  void parse_domain() {
    cur_.get();
    Token name = cur_.expect(Tok::Ident, "domain name");
    cur_.expect_punct('=', "in domain declaration");
    cur_.expect_punct('{', "before domain members");
    std::vector<std::string> members;
    do {
      const Token& t = cur_.peek();
      if (t.kind == Tok::Int && cur_.peek(1).kind == Tok::DotDot) {
        long long lo = cur_.get().int_value;
        cur_.get();
        long long hi = cur_.expect(Tok::Int, "range upper bound").int_value;
        for (long long v = lo; v <= hi; ++v) members.push_back(std::to_string(v));
      } else if (t.kind == Tok::Int) {
        members.push_back(std::to_string(cur_.get().int_value));
      } else {
        members.push_back(cur_.expect(Tok::Ident, "domain member").text);
      }
    } while (cur_.accept_punct(','));
    cur_.expect_punct('}', "after domain members");
    cur_.expect_punct('.', "after domain declaration");
    program_.domains.emplace_back(name.text, std::move(members));
  }

  void parse_pred() {
    cur_.get();
    Token name = cur_.expect(Tok::Ident, "predicate name");
    std::vector<std::string> doms;
    if (cur_.accept_punct('(')) {
      do {
        doms.push_back(cur_.expect(Tok::Ident, "argument domain").text);
      } while (cur_.accept_punct(','));
      cur_.expect_punct(')', "after predicate arguments");
    }
    cur_.expect_punct('.', "after predicate declaration");
    program_.predicates.emplace_back(name.text, std::move(doms));
  }

  void parse_clause() {
    Clause c;
    // annotation?
    const Token& t = cur_.peek();
    bool number_like = t.kind == Tok::Float || t.kind == Tok::Int;
    if (number_like && cur_.peek(1).kind == Tok::ColonColon) {
      Annotation a;
      a.kind = Annotation::Kind::Probability;
      a.probability = cur_.get().float_value;
      cur_.get();  // ::
      c.annotation = a;
    } else if (t.kind == Tok::Ident && t.text == "nn") {
      Annotation a;
      a.kind = Annotation::Kind::Neural;
      cur_.get();
      cur_.expect_punct('(', "after nn");
      a.network = cur_.expect(Tok::Ident, "network name").text;
      while (cur_.accept_punct(','))
        a.inputs.push_back(cur_.expect(Tok::Var, "network input variable").text);
      cur_.expect_punct(')', "after nn annotation");
      if (!cur_.accept(Tok::ColonColon)) cur_.error("expected '::' after nn annotation");
      c.annotation = a;
    }
    c.head = parse_literal();
    if (c.head.negated) cur_.error("clause heads cannot be negated");
    if (cur_.accept(Tok::ColonDash)) {
      do {
        c.body.push_back(parse_literal());
      } while (cur_.accept_punct(','));
    }
    cur_.expect_punct('.', "after clause");
    program_.clauses.push_back(std::move(c));
  }

  PLiteral parse_literal() {
    PLiteral lit;
    Token name = cur_.expect(Tok::Ident, "predicate");
    if (name.text == "not") {
      cur_.expect_punct('(', "after not");
      lit = parse_literal();
      lit.negated = true;
      cur_.expect_punct(')', "after negated literal");
      return lit;
    }
    lit.pred = name.text;
    if (cur_.accept_punct('(')) {
      std::size_t index = 0;
      do {
        // is/2 takes an arithmetic expression in its second position
        if (lit.pred == "is" && index == 1) lit.args.push_back(parse_arith());
        else lit.args.push_back(parse_term());
        ++index;
      } while (cur_.accept_punct(','));
      cur_.expect_punct(')', "after arguments");
    }
    return lit;
  }

  PTerm parse_term() {
    const Token& t = cur_.peek();
    if (t.kind == Tok::Var) return PTerm::var(cur_.get().text);
    if (t.kind == Tok::Int) return PTerm::integer(cur_.get().int_value);
    if (t.kind == Tok::Ident) return PTerm::sym(cur_.get().text);
    if (t.kind == Tok::Punct && t.text == "[") return parse_list();
    cur_.error("expected a term");
  }

  PTerm parse_list() {
    cur_.expect_punct('[', "at list start");
    if (cur_.accept_punct(']')) return PTerm::nil();
    std::vector<PTerm> items;
    items.push_back(parse_term());
    while (cur_.accept_punct(',')) items.push_back(parse_term());
    PTerm tail = PTerm::nil();
    if (cur_.accept_punct('|')) tail = parse_term();
    cur_.expect_punct(']', "at list end");
    for (auto it = items.rbegin(); it != items.rend(); ++it)
      tail = PTerm::cons(std::move(*it), std::move(tail));
    return tail;
  }

  // precedence: +,-  <  *,div,mod  <  **
  PTerm parse_arith() {
    PTerm lhs = parse_arith_mul();
    while (true) {
      if (cur_.peek().kind == Tok::Punct &&
          (cur_.peek().text == "+" || cur_.peek().text == "-")) {
        std::string op = cur_.get().text;
        lhs = PTerm::fn(op, {std::move(lhs), parse_arith_mul()});
      } else {
        return lhs;
      }
    }
  }

  PTerm parse_arith_mul() {
    PTerm lhs = parse_arith_pow();
    while (true) {
      const Token& t = cur_.peek();
      if (t.kind == Tok::Punct && t.text == "*") {
        cur_.get();
        lhs = PTerm::fn("*", {std::move(lhs), parse_arith_pow()});
      } else if (t.kind == Tok::Ident && (t.text == "mod" || t.text == "div")) {
        std::string op = cur_.get().text;
        lhs = PTerm::fn(op, {std::move(lhs), parse_arith_pow()});
      } else {
        return lhs;
      }
    }
  }

  PTerm parse_arith_pow() {
    PTerm lhs = parse_arith_atom();
    if (cur_.peek().kind == Tok::Power) {
      cur_.get();
      return PTerm::fn("**", {std::move(lhs), parse_arith_pow()});
    }
    return lhs;
  }

  PTerm parse_arith_atom() {
    const Token& t = cur_.peek();
    if (t.kind == Tok::Punct && t.text == "(") {
      cur_.get();
      PTerm inner = parse_arith();
      cur_.expect_punct(')', "in arithmetic expression");
      return inner;
    }
    if (t.kind == Tok::Var) return PTerm::var(cur_.get().text);
    if (t.kind == Tok::Int) return PTerm::integer(cur_.get().int_value);
    cur_.error("expected an arithmetic operand");
  }

  void validate() {
    for (const auto& c : program_.clauses) {
      if (c.is_fact() && !c.annotation) continue;
      if (!c.is_fact()) {
        // range restriction: head variables occur in a positive body literal
        std::set<std::string> body_vars;
        for (const auto& lit : c.body) {
          if (lit.negated) continue;
          for (const auto& a : lit.args) collect_vars(a, body_vars);
        }
        std::set<std::string> head_vars;
        for (const auto& a : c.head.args) collect_vars(a, head_vars);
        for (const auto& v : head_vars)
          if (!body_vars.count(v))
            fail("clause for '" + c.head.pred + "' is not range-restricted: head variable " +
                 v + " does not occur in a positive body literal");
      }
    }
    // duplicate ground annotations are a static error
    std::set<std::string> seen;
    for (const auto& c : program_.clauses) {
      if (!c.annotation || c.annotation->kind != Annotation::Kind::Probability) continue;
      bool ground = true;
      std::set<std::string> vars;
      for (const auto& a : c.head.args) collect_vars(a, vars);
      ground = vars.empty();
      if (ground && !seen.insert(c.head.str()).second)
        fail("duplicate annotation for fact " + c.head.str());
    }
  }

  static void collect_vars(const PTerm& t, std::set<std::string>& out) {
    if (t.kind == PTerm::Kind::Var) out.insert(t.name);
    for (const auto& a : t.args) collect_vars(a, out);
  }

  TokenCursor cur_;
  Program program_;
};

}  // namespace

Program parse_program(const std::string& text) {
  try {
    return ProgramParser(text).run();
  } catch (const ParseError& e) {
    fail("program parse error at " + std::to_string(e.line) + ":" + std::to_string(e.column) +
         ": " + e.message);
  }
}

PLiteral parse_query(const std::string& text) {
  try {
    return ProgramParser(text).literal_only();
  } catch (const ParseError& e) {
    fail("query parse error at " + std::to_string(e.line) + ":" + std::to_string(e.column) +
         ": " + e.message);
  }
}

// ---------------------------------------------------------------------------
// Grounding

namespace {

void collect_vars_ordered(const PTerm& t, std::vector<std::string>& out,
                          std::set<std::string>& seen) {
  if (t.kind == PTerm::Kind::Var && seen.insert(t.name).second) out.push_back(t.name);
  for (const auto& a : t.args) collect_vars_ordered(a, out, seen);
}

PTerm domain_term(const std::string& member) {
  if (!member.empty() &&
      std::all_of(member.begin(), member.end(), [](char c) { return std::isdigit(c) != 0; }))
    return PTerm::integer(std::stoll(member));
  return PTerm::sym(member);
}

bool is_builtin(const std::string& pred) {
  return pred == "between" || pred == "is" || pred == "length";
}

bool term_has_var(const PTerm& t) {
  if (t.kind == PTerm::Kind::Var) return true;
  for (const auto& a : t.args)
    if (term_has_var(a)) return true;
  return false;
}

PTerm substitute_term(const PTerm& t, const std::map<std::string, PTerm>& bind) {
  if (t.kind == PTerm::Kind::Var) {
    auto it = bind.find(t.name);
    return it != bind.end() ? it->second : t;
  }
  PTerm out = t;
  for (auto& a : out.args) a = substitute_term(a, bind);
  return out;
}

long long eval_arith_ground(const PTerm& t) {
  switch (t.kind) {
    case PTerm::Kind::Int: return t.num;
    case PTerm::Kind::Fn: {
      if (t.args.size() != 2) fail("unsupported arithmetic arity");
      long long a = eval_arith_ground(t.args[0]);
      long long b = eval_arith_ground(t.args[1]);
      if (t.name == "+") return a + b;
      if (t.name == "-") return a - b;
      if (t.name == "*") return a * b;
      if (t.name == "mod") {
        if (b == 0) fail("mod by zero");
        long long r = a % b;
        return r < 0 ? r + std::abs(b) : r;
      }
      if (t.name == "div") {
        if (b == 0) fail("div by zero");
        long long q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
      }
      if (t.name == "**") {
        long long r = 1;
        for (long long i = 0; i < b; ++i) r *= a;
        return r;
      }
      fail("unsupported arithmetic operator '" + t.name + "'");
    }
    default: fail("arithmetic over a non-integer term: " + t.str());
  }
}

std::optional<long long> list_length(const PTerm& t) {
  long long n = 0;
  const PTerm* p = &t;
  while (p->kind == PTerm::Kind::Cons) {
    ++n;
    p = &p->args[1];
  }
  if (p->kind != PTerm::Kind::Nil) return std::nullopt;
  return n;
}

// Ground built-in test: true when the literal succeeds under the binding.
bool builtin_holds(const PLiteral& lit) {
  if (lit.pred == "between") {
    long long lo = eval_arith_ground(lit.args[0]);
    long long hi = eval_arith_ground(lit.args[1]);
    long long x = eval_arith_ground(lit.args[2]);
    return lo <= x && x <= hi;
  }
  if (lit.pred == "is")
    return eval_arith_ground(lit.args[0]) == eval_arith_ground(lit.args[1]);
  if (lit.pred == "length") {
    auto n = list_length(lit.args[0]);
    if (!n) fail("length/2 over an incomplete list");
    return *n == eval_arith_ground(lit.args[1]);
  }
  fail("unknown built-in");
}

}  // namespace

std::vector<Clause> ground_program(const Program& p) {
  constexpr std::size_t kGuard = 1'000'000;
  std::map<std::string, std::vector<std::string>> domain_index(p.domains.begin(),
                                                               p.domains.end());
  std::map<std::string, std::vector<std::string>> pred_index(p.predicates.begin(),
                                                             p.predicates.end());
  std::vector<Clause> out;
  for (const Clause& c : p.clauses) {
    // variable domains from declared predicate positions
    std::vector<std::string> vars;
    std::set<std::string> seen;
    std::map<std::string, const std::vector<std::string>*> var_domain;
    auto visit = [&](const PLiteral& lit) {
      if (is_builtin(lit.pred)) return;
      auto sig = pred_index.find(lit.pred);
      for (std::size_t i = 0; i < lit.args.size(); ++i) {
        const PTerm& a = lit.args[i];
        if (a.kind == PTerm::Kind::Cons || a.kind == PTerm::Kind::Nil)
          fail("grounding requires finite declared domains; list arguments are "
               "query-driven (use prove)");
        if (a.kind != PTerm::Kind::Var) continue;
        if (sig == pred_index.end() || i >= sig->second.size()) continue;
        auto dom = domain_index.find(sig->second[i]);
        if (dom == domain_index.end()) continue;
        var_domain.try_emplace(a.name, &dom->second);
      }
    };
    visit(c.head);
    for (const auto& lit : c.body) visit(lit);
    collect_vars_ordered(c.head.args.empty() ? PTerm::nil() : PTerm::fn("h", c.head.args), vars,
                         seen);
    for (const auto& lit : c.body)
      collect_vars_ordered(lit.args.empty() ? PTerm::nil() : PTerm::fn("b", lit.args), vars,
                           seen);
    for (const auto& v : vars)
      if (!var_domain.count(v))
        fail("grounding needs a declared domain for variable " + v + " in clause for " +
             c.head.pred);

    std::map<std::string, PTerm> bind;
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == vars.size()) {
        Clause g;
        g.annotation = c.annotation;
        g.head.pred = c.head.pred;
        for (const auto& a : c.head.args) g.head.args.push_back(substitute_term(a, bind));
        bool builtins_ok = true;
        for (const auto& lit : c.body) {
          PLiteral gl;
          gl.pred = lit.pred;
          gl.negated = lit.negated;
          for (const auto& a : lit.args) gl.args.push_back(substitute_term(a, bind));
          if (is_builtin(gl.pred)) {
            if (!builtin_holds(gl)) {
              builtins_ok = false;
              break;
            }
          } else {
            g.body.push_back(std::move(gl));
          }
        }
        if (builtins_ok) {
          out.push_back(std::move(g));
          if (out.size() > kGuard) fail("grounding size guard exceeded (1e6 clauses)");
        }
        return;
      }
      for (const auto& member : *var_domain.at(vars[i])) {
        bind[vars[i]] = domain_term(member);
        rec(i + 1);
      }
      bind.erase(vars[i]);
    };
    rec(0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SLD resolution

namespace {

struct Solver {
  const Program& p;
  const ProveOptions& opts;
  std::map<std::string, std::vector<std::string>> pred_index;
  std::map<std::string, std::vector<std::string>> domain_index;

  // clause templates with variables compiled to frame-local indices
  struct Template {
    PLiteral head;
    std::vector<PLiteral> body;
    const Annotation* annotation = nullptr;
    int nvars = 0;
  };
  std::map<std::string, std::vector<Template>> templates;
  std::map<std::string, const Annotation*> annotations;
  std::map<std::string, std::vector<char>> input_positions;  // neural heads

  // stack-disciplined variable frames: ids recycle on backtracking
  std::vector<PTerm> slot;
  std::vector<char> is_bound;
  std::vector<std::int32_t> trail;
  std::int32_t next_var = 0;

  std::vector<ProofLiteral> leaves;
  std::vector<std::int32_t> leaf_ids;  // interned literal id per pushed leaf
  std::map<std::string, std::string> group_choice;  // neural group -> class key
  std::vector<std::string> group_trail;

  const std::vector<PLiteral>* query = nullptr;
  std::vector<std::vector<char>> query_arg_varying;  // per goal, per arg
  std::unordered_set<std::string> dedup;
  std::map<std::string, std::int32_t> literal_index;
  std::map<std::string, std::int32_t> answer_index;
  ProveResult result;

  explicit Solver(const Program& prog, const ProveOptions& o) : p(prog), opts(o) {
    for (const auto& [k, v] : p.predicates) pred_index.emplace(k, v);
    for (const auto& [k, v] : p.domains) domain_index.emplace(k, v);
    for (const Clause& c : p.clauses) {
      Template t;
      std::map<std::string, std::int32_t> locals;
      t.head = compile_literal(c.head, locals);
      for (const auto& lit : c.body) t.body.push_back(compile_literal(lit, locals));
      t.annotation = c.annotation ? &*c.annotation : nullptr;
      t.nvars = static_cast<int>(locals.size());
      templates[c.head.pred].push_back(std::move(t));
      if (c.annotation) {
        annotations.emplace(c.head.pred, &*c.annotation);
        if (c.annotation->kind == Annotation::Kind::Neural) {
          std::vector<char> inputs(c.head.args.size(), 0);
          for (std::size_t i = 0; i < c.head.args.size(); ++i) {
            const PTerm& hv = c.head.args[i];
            inputs[i] = hv.kind == PTerm::Kind::Var &&
                        std::find(c.annotation->inputs.begin(), c.annotation->inputs.end(),
                                  hv.name) != c.annotation->inputs.end();
          }
          input_positions.emplace(c.head.pred, std::move(inputs));
        }
      }
    }
  }

  static PTerm compile_term(const PTerm& t, std::map<std::string, std::int32_t>& locals) {
    if (t.kind == PTerm::Kind::Var) {
      auto [it, fresh] =
          locals.try_emplace(t.name, static_cast<std::int32_t>(locals.size()));
      PTerm v = PTerm::var("");
      v.num = it->second;
      return v;
    }
    PTerm out = t;
    for (auto& a : out.args) a = compile_term(a, locals);
    return out;
  }

  static PLiteral compile_literal(const PLiteral& lit,
                                  std::map<std::string, std::int32_t>& locals) {
    PLiteral out;
    out.pred = lit.pred;
    out.negated = lit.negated;
    for (const auto& a : lit.args) out.args.push_back(compile_term(a, locals));
    return out;
  }

  struct Mark {
    std::size_t trail;
    std::int32_t vars;
  };
  Mark mark() const { return {trail.size(), next_var}; }
  void undo(Mark m) {
    while (trail.size() > m.trail) {
      is_bound[trail.back()] = 0;
      trail.pop_back();
    }
    next_var = m.vars;
  }

  std::int32_t alloc_frame(int nvars) {
    std::int32_t base = next_var;
    next_var += nvars;
    if (static_cast<std::size_t>(next_var) > slot.size()) {
      slot.resize(next_var);
      is_bound.resize(next_var, 0);
    }
    return base;
  }

  static PTerm frame_term(const PTerm& t, std::int32_t base) {
    if (t.kind == PTerm::Kind::Var) {
      PTerm v = t;
      v.num += base;
      return v;
    }
    if (t.args.empty()) return t;
    PTerm out = t;
    for (auto& a : out.args) a = frame_term(a, base);
    return out;
  }

  const PTerm& shallow(const PTerm& t) const {
    const PTerm* cur = &t;
    while (cur->kind == PTerm::Kind::Var && is_bound[cur->num]) cur = &slot[cur->num];
    return *cur;
  }

  PTerm walk(const PTerm& t) const {
    const PTerm& s = shallow(t);
    if (s.args.empty()) return s;
    PTerm out = s;
    for (auto& a : out.args) a = walk(a);
    return out;
  }

  void bind_var(std::int32_t id, const PTerm& value) {
    slot[id] = value;
    is_bound[id] = 1;
    trail.push_back(id);
  }

  bool unify(const PTerm& x, const PTerm& y) {
    const PTerm& a = shallow(x);
    const PTerm& b = shallow(y);
    if (a.kind == PTerm::Kind::Var) {
      if (b.kind == PTerm::Kind::Var && a.num == b.num) return true;
      bind_var(a.num, b);
      return true;
    }
    if (b.kind == PTerm::Kind::Var) {
      bind_var(b.num, a);
      return true;
    }
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case PTerm::Kind::Sym: return a.name == b.name;
      case PTerm::Kind::Int: return a.num == b.num;
      case PTerm::Kind::Nil: return true;
      case PTerm::Kind::Cons: {
        // iterative on the spine; lists dominate the workload
        PTerm lhs = a, rhs = b;
        while (true) {
          if (!unify(lhs.args[0], rhs.args[0])) return false;
          const PTerm& lt = shallow(lhs.args[1]);
          const PTerm& rt = shallow(rhs.args[1]);
          if (lt.kind == PTerm::Kind::Cons && rt.kind == PTerm::Kind::Cons) {
            lhs = lt;
            rhs = rt;
            continue;
          }
          return unify(lt, rt);
        }
      }
      case PTerm::Kind::Fn:
        if (a.name != b.name || a.args.size() != b.args.size()) return false;
        for (std::size_t i = 0; i < a.args.size(); ++i)
          if (!unify(a.args[i], b.args[i])) return false;
        return true;
      default: return false;
    }
  }

  long long eval_arith(const PTerm& t) const {
    const PTerm& s = shallow(t);
    switch (s.kind) {
      case PTerm::Kind::Var:
        fail("is/2 needs a ground arithmetic expression (unbound variable)");
      case PTerm::Kind::Int: return s.num;
      case PTerm::Kind::Fn: {
        PTerm g = s;
        // evaluate through bindings without materializing the whole tree
        long long a = eval_arith(g.args[0]);
        long long b = eval_arith(g.args[1]);
        if (g.name == "+") return a + b;
        if (g.name == "-") return a - b;
        if (g.name == "*") return a * b;
        if (g.name == "mod") {
          if (b == 0) fail("mod by zero");
          long long r = a % b;
          return r < 0 ? r + std::abs(b) : r;
        }
        if (g.name == "div") {
          if (b == 0) fail("div by zero");
          long long q = a / b;
          if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
          return q;
        }
        if (g.name == "**") {
          long long r = 1;
          for (long long i = 0; i < b; ++i) r *= a;
          return r;
        }
        fail("unsupported arithmetic operator '" + g.name + "'");
      }
      default: fail("arithmetic over a non-integer term: " + s.str());
    }
  }

  void record_proof() {
    // key answers on the varying argument positions only; constant query
    // arguments (e.g. fixed image lists) are walked once per fresh answer
    std::string answer_key;
    if (query) {
      for (std::size_t g = 0; g < query->size(); ++g)
        for (std::size_t i = 0; i < (*query)[g].args.size(); ++i)
          if (query_arg_varying[g][i])
            answer_key += walk((*query)[g].args[i]).str() + ";";
    }
    auto [ait, fresh_answer] =
        answer_index.try_emplace(answer_key, static_cast<std::int32_t>(result.answers.size()));
    if (fresh_answer) {
      std::vector<PTerm> answer;
      if (query)
        for (const auto& lit : *query)
          for (const auto& a : lit.args) answer.push_back(walk(a));
      result.answers.push_back(std::move(answer));
    }
    std::int32_t answer_id = ait->second;

    std::vector<std::int32_t> ids = leaf_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

    std::string key(reinterpret_cast<const char*>(&answer_id), sizeof(answer_id));
    key.append(reinterpret_cast<const char*>(ids.data()), ids.size() * sizeof(std::int32_t));
    if (!dedup.insert(std::move(key)).second) return;  // identical proofs merge
    result.proofs.push_back(std::move(ids));
    result.proof_answer.push_back(answer_id);
  }

  // exclusivity bookkeeping for annotated leaves; returns false to prune
  bool push_leaf(const PLiteral& ground, const Annotation& ann, bool positive, bool& pushed,
                 std::size_t& group_mark) {
    pushed = false;
    group_mark = group_trail.size();
    for (const auto& l : leaves)
      if (l.pred == ground.pred && l.args == ground.args) {
        if (l.positive == positive) return true;  // duplicate leaf merges
        return false;                             // contradictory polarity
      }
    if (ann.kind == Annotation::Kind::Neural) {
      const std::vector<char>& inputs = input_positions.at(ground.pred);
      std::string group = ground.pred, cls;
      for (std::size_t i = 0; i < ground.args.size(); ++i) {
        bool is_input = i < inputs.size() && inputs[i];
        (is_input ? group : cls) += "|" + ground.args[i].str();
      }
      if (!cls.empty()) {
        auto it = group_choice.find(group);
        if (positive) {
          if (it != group_choice.end() && it->second != cls) return false;  // two classes
          if (it == group_choice.end()) {
            group_choice.emplace(group, std::move(cls));
            group_trail.push_back(std::move(group));
          }
        } else if (it != group_choice.end()) {
          if (it->second == cls) return false;  // chosen class negated
          return true;  // entailed by exclusivity: no leaf needed
        }
      }
    }
    ProofLiteral leaf;
    leaf.pred = ground.pred;
    leaf.args = ground.args;
    leaf.positive = positive;
    std::string key = leaf.pred + "(" + leaf.str_args() + ")" + (leaf.positive ? "+" : "-");
    auto [it, fresh] = literal_index.try_emplace(
        std::move(key), static_cast<std::int32_t>(result.literals.size()));
    if (fresh) result.literals.push_back(leaf);
    leaf_ids.push_back(it->second);
    leaves.push_back(std::move(leaf));
    pushed = true;
    return true;
  }

  void pop_leaf(bool pushed, std::size_t group_mark) {
    if (pushed) {
      leaves.pop_back();
      leaf_ids.pop_back();
    }
    while (group_trail.size() > group_mark) {
      group_choice.erase(group_trail.back());
      group_trail.pop_back();
    }
  }

  void solve(std::vector<PLiteral>& goals, long long depth) {
    if (depth > opts.max_depth)
      fail("resolution depth limit exceeded (" + std::to_string(opts.max_depth) + " steps)");
    if (goals.empty()) {
      record_proof();
      return;
    }
    PLiteral goal = goals.back();
    goals.pop_back();
    resolve_goal(goal, goals, depth);
    goals.push_back(std::move(goal));
  }

  void resolve_goal(const PLiteral& goal, std::vector<PLiteral>& goals, long long depth) {
    if (goal.negated) return resolve_negation(goal, goals, depth);
    if (goal.pred == "between") return resolve_between(goal, goals, depth);
    if (goal.pred == "is") return resolve_is(goal, goals, depth);
    if (goal.pred == "length") return resolve_length(goal, goals, depth);
    if (annotations.count(goal.pred)) return resolve_annotated(goal, goals, depth);
    auto it = templates.find(goal.pred);
    if (it == templates.end()) fail("unknown predicate '" + goal.pred + "' in a goal");
    for (const Template& t : it->second) {
      Mark m = mark();
      std::int32_t base = alloc_frame(t.nvars);
      bool ok = goal.args.size() == t.head.args.size();
      for (std::size_t i = 0; ok && i < goal.args.size(); ++i)
        ok = unify(goal.args[i], frame_term(t.head.args[i], base));
      if (ok) {
        std::size_t pushed = 0;
        for (auto bit = t.body.rbegin(); bit != t.body.rend(); ++bit) {
          PLiteral lit;
          lit.pred = bit->pred;
          lit.negated = bit->negated;
          lit.args.reserve(bit->args.size());
          for (const auto& a : bit->args) lit.args.push_back(frame_term(a, base));
          goals.push_back(std::move(lit));
          ++pushed;
        }
        solve(goals, depth + 1);
        goals.resize(goals.size() - pushed);
      }
      undo(m);
    }
  }

  [[noreturn]] static void non_ground_negation(const PLiteral& goal) {
    fail("negated literal must be ground: " + goal.str());
  }

  void resolve_negation(const PLiteral& goal, std::vector<PLiteral>& goals, long long depth) {
    if (!annotations.count(goal.pred))
      fail("negation is supported on annotated base facts only (got '" + goal.pred + "')");
    PLiteral ground;
    ground.pred = goal.pred;
    for (const auto& a : goal.args) {
      PTerm w = walk(a);
      if (has_var(w)) non_ground_negation(goal);
      ground.args.push_back(std::move(w));
    }
    bool pushed;
    std::size_t gm;
    if (push_leaf(ground, *annotations.at(goal.pred), false, pushed, gm))
      solve(goals, depth + 1);
    pop_leaf(pushed, gm);
  }

  static bool has_var(const PTerm& t) {
    if (t.kind == PTerm::Kind::Var) return true;
    for (const auto& a : t.args)
      if (has_var(a)) return true;
    return false;
  }

  void resolve_between(const PLiteral& goal, std::vector<PLiteral>& goals, long long depth) {
    long long lo = eval_arith(goal.args[0]);
    long long hi = eval_arith(goal.args[1]);
    const PTerm& x = shallow(goal.args[2]);
    if (x.kind == PTerm::Kind::Int) {
      if (lo <= x.num && x.num <= hi) solve(goals, depth + 1);
      return;
    }
    if (x.kind != PTerm::Kind::Var) return;
    std::int32_t id = static_cast<std::int32_t>(x.num);
    for (long long v = lo; v <= hi; ++v) {
      Mark m = mark();
      bind_var(id, PTerm::integer(v));
      solve(goals, depth + 1);
      undo(m);
    }
  }

  void resolve_is(const PLiteral& goal, std::vector<PLiteral>& goals, long long depth) {
    long long v = eval_arith(goal.args[1]);
    Mark m = mark();
    if (unify(goal.args[0], PTerm::integer(v))) solve(goals, depth + 1);
    undo(m);
  }

  void resolve_length(const PLiteral& goal, std::vector<PLiteral>& goals, long long depth) {
    PTerm l = walk(goal.args[0]);
    auto n = list_length(l);
    if (!n) fail("length/2 over an incomplete list: " + l.str());
    Mark m = mark();
    if (unify(goal.args[1], PTerm::integer(*n))) solve(goals, depth + 1);
    undo(m);
  }

  void resolve_annotated(const PLiteral& goal, std::vector<PLiteral>& goals, long long depth) {
    for (const Template& t : templates.at(goal.pred)) {
      if (!t.annotation) continue;
      Mark m = mark();
      std::int32_t base = alloc_frame(t.nvars);
      bool ok = goal.args.size() == t.head.args.size();
      for (std::size_t i = 0; ok && i < goal.args.size(); ++i)
        ok = unify(goal.args[i], frame_term(t.head.args[i], base));
      if (ok) ground_leaf_and_continue(goal, *t.annotation, goals, depth);
      undo(m);
    }
  }

  // after head unification the leaf may keep free variables (schema facts);
  // they enumerate over the declared domains of their positions
  void ground_leaf_and_continue(const PLiteral& goal, const Annotation& ann,
                                std::vector<PLiteral>& goals, long long depth) {
    std::vector<std::pair<std::int32_t, const std::vector<std::string>*>> free_vars;
    auto sig = pred_index.find(goal.pred);
    for (std::size_t i = 0; i < goal.args.size(); ++i) {
      const PTerm& s = shallow(goal.args[i]);
      if (s.kind != PTerm::Kind::Var) continue;
      if (sig == pred_index.end() || i >= sig->second.size())
        fail("annotated fact '" + goal.pred + "' needs a pred declaration to enumerate "
             "its free arguments");
      auto dom = domain_index.find(sig->second[i]);
      if (dom == domain_index.end()) fail("unknown domain in declaration of " + goal.pred);
      free_vars.emplace_back(static_cast<std::int32_t>(s.num), &dom->second);
    }
    std::function<void(std::size_t)> enumerate = [&](std::size_t i) {
      if (i == free_vars.size()) {
        PLiteral instance;
        instance.pred = goal.pred;
        for (const auto& a : goal.args) instance.args.push_back(walk(a));
        bool pushed;
        std::size_t gm;
        if (push_leaf(instance, ann, true, pushed, gm)) solve(goals, depth + 1);
        pop_leaf(pushed, gm);
        return;
      }
      for (const auto& member : *free_vars[i].second) {
        Mark m = mark();
        bind_var(free_vars[i].first, domain_term(member));
        enumerate(i + 1);
        undo(m);
      }
    };
    enumerate(0);
  }
};

}  // namespace

ProveResult prove(const Program& p, const std::vector<PLiteral>& goals,
                  const ProveOptions& options) {
  Solver solver(p, options);
  std::map<std::string, std::int32_t> locals;
  std::vector<PLiteral> compiled;
  for (const auto& g : goals) compiled.push_back(Solver::compile_literal(g, locals));
  solver.alloc_frame(static_cast<int>(locals.size()));
  solver.query = &compiled;
  for (const auto& lit : compiled) {
    std::vector<char> varying;
    for (const auto& a : lit.args) varying.push_back(term_has_var(a) ? 1 : 0);
    solver.query_arg_varying.push_back(std::move(varying));
  }
  std::vector<PLiteral> stack(compiled.rbegin(), compiled.rend());
  solver.solve(stack, 0);
  return std::move(solver.result);
}

// ---------------------------------------------------------------------------
// Frontend model binding

namespace {

std::string const_symbol(const PTerm& t) {
  switch (t.kind) {
    case PTerm::Kind::Sym: return t.name;
    case PTerm::Kind::Int: return std::to_string(t.num);
    default: fail("annotated facts take constant arguments, got " + t.str());
  }
}

}  // namespace

Frontend make_frontend(const Program& p) {
  Frontend fe;
  fe.program = p;
  Model& m = fe.model;
  m.add_structure("prob");
  m.add_structure("bool");
  m.add_transformation(iverson());
  m.truth = TruthDomain::Boolean;
  for (const auto& [name, members] : p.domains) {
    DomainId dom = m.add_domain(name);
    for (const auto& member : members) m.domains[dom].members.push_back(m.add_constant(member));
  }
  std::map<std::string, std::vector<std::string>> pred_index(p.predicates.begin(),
                                                             p.predicates.end());
  std::set<std::string> done;
  for (const Clause& c : p.clauses) {
    if (!c.annotation || !done.insert(c.head.pred).second) continue;
    auto sig = pred_index.find(c.head.pred);
    if (sig == pred_index.end())
      fail("annotated predicate '" + c.head.pred + "' needs a pred declaration");
    PredicateSignature ps;
    ps.name = c.head.pred;
    for (const auto& dname : sig->second) {
      auto it = m.domain_index.find(dname);
      if (it == m.domain_index.end()) fail("unknown domain '" + dname + "'");
      ps.domains.push_back(it->second);
    }
    PredId pred = m.add_predicate(std::move(ps));

    LabelEntry identity;
    identity.pred = pred;
    identity.sid = m.structure_id("bool");
    identity.kind = LabelKind::Identity;
    m.labelling.entries.push_back(identity);

    LabelEntry w;
    w.pred = pred;
    w.sid = m.structure_id("prob");
    if (c.annotation->kind == Annotation::Kind::Neural) {
      w.kind = LabelKind::Categorical;
      int class_arg = -1;
      for (std::size_t i = 0; i < c.head.args.size(); ++i) {
        const PTerm& hv = c.head.args[i];
        bool is_input = hv.kind == PTerm::Kind::Var &&
                        std::find(c.annotation->inputs.begin(), c.annotation->inputs.end(),
                                  hv.name) != c.annotation->inputs.end();
        if (is_input) continue;
        if (class_arg >= 0)
          fail("neural annotation for '" + c.head.pred + "' has more than one class argument");
        class_arg = static_cast<int>(i);
      }
      w.class_arg = class_arg;
    } else {
      w.kind = LabelKind::Table;
      bool any_ground = false;
      for (const Clause& fact : p.clauses) {
        if (!fact.annotation || fact.head.pred != c.head.pred) continue;
        if (fact.annotation->kind != Annotation::Kind::Probability)
          fail("predicate '" + c.head.pred + "' mixes neural and probability annotations");
        bool ground = true;
        for (const auto& a : fact.head.args) ground = ground && !term_has_var(a);
        if (ground) {
          std::vector<ConstId> args;
          for (const auto& a : fact.head.args) {
            auto it = m.constant_index.find(const_symbol(a));
            if (it == m.constant_index.end())
              fail("constant outside domain in annotated fact " + fact.head.str());
            args.push_back(it->second);
          }
          double prob = fact.annotation->probability;
          w.table[args] = {1.0 - prob, prob};
          any_ground = true;
        } else {
          if (any_ground || w.uniform_p)
            fail("predicate '" + c.head.pred + "' mixes schema and ground annotations");
          w.uniform_p = fact.annotation->probability;
        }
      }
    }
    m.labelling.entries.push_back(std::move(w));
  }
  return fe;
}

// ---------------------------------------------------------------------------
// Formula assembly

namespace {

Atom model_atom(const Model& m, const ProofLiteral& leaf) {
  auto it = m.predicate_index.find(leaf.pred);
  if (it == m.predicate_index.end()) fail("leaf predicate '" + leaf.pred + "' not in the model");
  Atom a;
  a.pred = it->second;
  for (const auto& t : leaf.args) {
    auto c = m.constant_index.find(const_symbol(t));
    if (c == m.constant_index.end())
      fail("constant outside domain: '" + t.str() + "' in " + leaf.pred);
    a.args.push_back(Term::make_const(c->second));
  }
  return a;
}

struct LogicParts {
  FormulaPtr logic;                 // exactly-one constraints and the proof DNF
  std::vector<Atom> aggregated;     // group atoms first, then Bernoulli atoms
};

LogicParts assemble_logic(Frontend& fe, const ProveResult& r,
                          const std::vector<std::int32_t>& proof_ids) {
  Model& m = fe.model;
  StructId bs = m.structure_id("bool");
  StructId ps = m.structure_id("prob");

  // literal atoms used by the selected proofs, resolved once
  std::vector<Atom> atom_of(r.literals.size());
  std::vector<char> used(r.literals.size(), 0);
  for (std::int32_t pid : proof_ids)
    for (std::int32_t lid : r.proofs[pid]) {
      if (used[lid]) continue;
      used[lid] = 1;
      atom_of[lid] = model_atom(m, r.literals[lid]);
    }

  // groups touched by the proofs: one per (pred, non-class args) instance
  std::map<std::string, std::vector<Atom>> groups;  // key -> full member list
  std::map<std::string, Atom> bernoulli;
  for (std::size_t lid = 0; lid < r.literals.size(); ++lid) {
    if (!used[lid]) continue;
    const Atom& a = atom_of[lid];
    const LabelEntry* e = m.labelling.find(a.pred, ps);
    if (e && e->class_arg >= 0) {
      std::string key = std::to_string(a.pred);
      for (std::size_t i = 0; i < a.args.size(); ++i)
        if (static_cast<int>(i) != e->class_arg)
          key += "|" + std::to_string(a.args[i].constant);
      if (groups.count(key)) continue;
      DomainId dom = m.predicates.at(a.pred).domains.at(e->class_arg);
      std::vector<Atom> members;
      for (ConstId cls : m.domains.at(dom).members) {
        Atom member = a;
        member.args[e->class_arg] = Term::make_const(cls);
        members.push_back(std::move(member));
      }
      groups.emplace(std::move(key), std::move(members));
    } else {
      bernoulli.emplace(print_atom(m, a), a);
    }
  }

  LogicParts out;
  for (const auto& [key, members] : groups) {
    FormulaPtr eo = exactly_one_formula(m, bs, members);
    out.logic = out.logic ? f_binary(bs, "and", out.logic, eo) : eo;
    for (const Atom& a : members) out.aggregated.push_back(a);
  }
  for (const auto& [key, a] : bernoulli) out.aggregated.push_back(a);

  FormulaPtr dnf;
  for (std::int32_t pid : proof_ids) {
    FormulaPtr conj;
    for (std::int32_t lid : r.proofs[pid]) {
      FormulaPtr lit = f_atom(bs, atom_of[lid]);
      if (!r.literals[lid].positive) lit = f_unary(bs, "not", lit);
      conj = conj ? f_binary(bs, "and", conj, lit) : lit;
    }
    if (!conj) conj = f_const(bs, Value::boolean(true));  // a proof with no leaves
    dnf = dnf ? f_binary(bs, "or", dnf, conj) : conj;
  }
  if (!dnf) dnf = f_const(bs, Value::boolean(false));
  out.logic = out.logic ? f_binary(bs, "and", out.logic, dnf) : dnf;
  return out;
}

NamedFormula wrap_wmc(Frontend& fe, const LogicParts& parts, const std::string& name,
                      const ToDeepLogOptions& options) {
  Model& m = fe.model;
  StructId ps = m.structure_id("prob");
  int iv = m.transformation_index.at("iverson");
  FormulaPtr body = f_transform(ps, iv, parts.logic);
  for (const Atom& a : parts.aggregated)
    body = f_binary(ps, "mul", body, f_atom(ps, a));
  for (auto it = parts.aggregated.rbegin(); it != parts.aggregated.rend(); ++it)
    body = f_agg_atom(ps, *it, "sum", body);

  NamedFormula nf;
  nf.name = name;
  nf.body = body;

  if (!options.lift.empty()) {
    std::map<ConstId, std::string> lifted;
    for (const auto& [symbol, var] : options.lift) {
      auto it = m.constant_index.find(symbol);
      if (it == m.constant_index.end()) fail("lift names unknown constant '" + symbol + "'");
      lifted.emplace(it->second, var);
      DomainId dom = -1;
      for (std::size_t d = 0; d < m.domains.size(); ++d) {
        const auto& members = m.domains[d].members;
        if (std::find(members.begin(), members.end(), it->second) != members.end())
          dom = static_cast<DomainId>(d);
      }
      if (dom < 0) fail("lifted constant '" + symbol + "' belongs to no domain");
      nf.params.emplace_back(var, dom);
    }
    std::function<FormulaPtr(const FormulaPtr&)> lift = [&](const FormulaPtr& f) -> FormulaPtr {
      auto lift_atom = [&](const Atom& a) {
        Atom out = a;
        for (auto& t : out.args) {
          if (t.is_var) continue;
          auto it = lifted.find(t.constant);
          if (it != lifted.end()) t = Term::make_var(it->second);
        }
        return out;
      };
      switch (f->kind) {
        case Formula::Kind::Atom: return f_atom(f->sid, lift_atom(f->atom));
        case Formula::Kind::Const: return f;
        case Formula::Kind::Unary: return f_unary(f->sid, f->op, lift(f->child));
        case Formula::Kind::Binary:
          return f_binary(f->sid, f->op, lift(f->child), lift(f->rhs));
        case Formula::Kind::AggAtom:
          return f_agg_atom(f->sid, lift_atom(f->atom), f->op, lift(f->child));
        case Formula::Kind::AggVar:
          return f_agg_var(f->sid, f->var, f->var_domain, f->op, lift(f->child));
        case Formula::Kind::Transform:
          return f_transform(f->sid, f->transform, lift(f->child));
      }
      fail("unreachable");
    };
    nf.body = lift(nf.body);
  }
  return nf;
}

bool answer_less(const std::vector<PTerm>& a, const std::vector<PTerm>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i].kind == PTerm::Kind::Int && b[i].kind == PTerm::Kind::Int) {
      if (a[i].num != b[i].num) return a[i].num < b[i].num;
    } else {
      std::string x = a[i].str(), y = b[i].str();
      if (x != y) return x < y;
    }
  }
  return a.size() < b.size();
}

}  // namespace

namespace {

std::vector<std::int32_t> all_proof_ids(const ProveResult& r) {
  std::vector<std::int32_t> ids(r.proofs.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

NamedFormula unprovable_formula(Frontend& fe, const std::string& name,
                                const ToDeepLogOptions& options) {
  Model& m = fe.model;
  StructId ps = m.structure_id("prob");
  StructId bs = m.structure_id("bool");
  int iv = m.transformation_index.at("iverson");
  NamedFormula nf;
  nf.name = name;
  nf.body = f_transform(ps, iv, f_const(bs, Value::boolean(false)));
  for (const auto& [symbol, var] : options.lift) {
    auto it = m.constant_index.find(symbol);
    if (it == m.constant_index.end()) continue;
    for (std::size_t d = 0; d < m.domains.size(); ++d) {
      const auto& members = m.domains[d].members;
      if (std::find(members.begin(), members.end(), it->second) != members.end()) {
        nf.params.emplace_back(var, static_cast<DomainId>(d));
        break;
      }
    }
  }
  return nf;
}

}  // namespace

FormulaPtr prove_formula(Frontend& fe, const std::vector<PLiteral>& goals) {
  ProveResult r = prove(fe.program, goals, fe.options);
  if (r.proofs.empty()) return f_const(fe.model.structure_id("bool"), Value::boolean(false));
  return assemble_logic(fe, r, all_proof_ids(r)).logic;
}

GroupedProofs prove_grouped(Frontend& fe, const std::vector<PLiteral>& goals) {
  GroupedProofs out;
  out.result = prove(fe.program, goals, fe.options);
  const ProveResult& r = out.result;
  std::map<std::int32_t, AnswerGroup> by_answer;
  for (std::size_t i = 0; i < r.proofs.size(); ++i) {
    std::int32_t aid = r.proof_answer[i];
    auto& slot = by_answer[aid];
    if (slot.proof_ids.empty()) {
      PLiteral instance;
      instance.pred = goals.size() == 1 ? goals[0].pred : "query";
      instance.args = r.answers[aid];
      slot.answer = instance.str();
      slot.answer_args = r.answers[aid];
    }
    slot.proof_ids.push_back(static_cast<std::int32_t>(i));
  }
  for (auto& [aid, group] : by_answer) out.groups.push_back(std::move(group));
  std::sort(out.groups.begin(), out.groups.end(),
            [](const AnswerGroup& a, const AnswerGroup& b) {
              return answer_less(a.answer_args, b.answer_args);
            });
  return out;
}

NamedFormula wrap_answer(Frontend& fe, const ProveResult& proofs,
                         const std::vector<std::int32_t>& proof_ids, const std::string& name,
                         const ToDeepLogOptions& options) {
  LogicParts parts = assemble_logic(fe, proofs, proof_ids);
  return wrap_wmc(fe, parts, name, options);
}

std::vector<AnswerFormula> to_deeplog(Frontend& fe, const PLiteral& query,
                                      const ToDeepLogOptions& options) {
  GroupedProofs grouped = prove_grouped(fe, {query});
  std::vector<AnswerFormula> out;
  for (const auto& group : grouped.groups) {
    AnswerFormula af;
    af.answer = group.answer;
    af.answer_args = group.answer_args;
    af.proof_count = group.proof_ids.size();
    af.formula = wrap_answer(fe, grouped.result, group.proof_ids, group.answer, options);
    out.push_back(std::move(af));
  }
  return out;
}

AnswerFormula to_deeplog_conjunction(Frontend& fe, const std::vector<PLiteral>& goals,
                                     const std::string& name,
                                     const ToDeepLogOptions& options) {
  ProveResult r = prove(fe.program, goals, fe.options);
  AnswerFormula af;
  af.answer = name;
  af.proof_count = r.proofs.size();
  if (r.proofs.empty()) {
    af.formula = unprovable_formula(fe, name, options);
    return af;
  }
  LogicParts parts = assemble_logic(fe, r, all_proof_ids(r));
  af.formula = wrap_wmc(fe, parts, name, options);
  return af;
}

}  // namespace deeplog
