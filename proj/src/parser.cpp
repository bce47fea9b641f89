#include "deeplog/parser.hpp"

#include <set>

#include "lexer.hpp"

namespace deeplog {

namespace {

class ModelParser {
 public:
  explicit ModelParser(const std::string& text) : cur_(Lexer(text).run()) {}

  ParseResult run() {
    while (!cur_.at_end()) {
      try {
        statement();
      } catch (const ParseError& e) {
        result_.diagnostics.push_back(
            {Diagnostic::Severity::Error, e.message, e.line, e.column});
        cur_.sync_statement();
      }
    }
    finalize();
    return std::move(result_);
  }

 private:
  Model& m() { return result_.model; }
  const Model& m() const { return result_.model; }

  void statement() {
    const Token& head = cur_.peek();
    if (head.kind != Tok::Ident) cur_.error("expected a statement keyword");
    const std::string kw = head.text;
    if (kw == "structure") parse_structure();
    else if (kw == "domain") parse_domain();
    else if (kw == "tensor") parse_tensor();
    else if (kw == "pred") parse_pred();
    else if (kw == "truth") parse_truth();
    else if (kw == "label") parse_label();
    else if (kw == "formula") parse_formula();
    else cur_.error("unknown statement '" + kw + "'");
  }

  void parse_structure() {
    cur_.get();
    do {
      Token t = cur_.expect(Tok::Ident, "structure id");
      if (!is_known_structure(t.text))
        throw ParseError{"unknown structure id '" + t.text + "'", t.line, t.column};
      m().add_structure(t.text);
    } while (cur_.accept_punct(','));
    cur_.expect_punct('.', "after structure declaration");
  }

  void parse_domain() {
    cur_.get();
    Token name = cur_.expect(Tok::Ident, "domain name");
    if (m().domain_index.count(name.text))
      throw ParseError{"duplicate domain '" + name.text + "'", name.line, name.column};
    DomainId dom = m().add_domain(name.text);
    cur_.expect_punct('=', "in domain declaration");
    cur_.expect_punct('{', "before domain members");
    std::set<ConstId> seen;
    do {
      const Token& t = cur_.peek();
      if (t.kind == Tok::Int && cur_.peek(1).kind == Tok::DotDot) {
        long long lo = cur_.get().int_value;
        cur_.get();  // ..
        Token hi_tok = cur_.expect(Tok::Int, "range upper bound");
        long long hi = hi_tok.int_value;
        if (hi < lo) throw ParseError{"empty range", hi_tok.line, hi_tok.column};
        for (long long v = lo; v <= hi; ++v)
          add_member(dom, std::to_string(v), seen, t);
      } else if (t.kind == Tok::Int) {
        add_member(dom, std::to_string(cur_.get().int_value), seen, t);
      } else {
        Token c = cur_.expect(Tok::Ident, "domain member");
        add_member(dom, c.text, seen, c);
      }
    } while (cur_.accept_punct(','));
    cur_.expect_punct('}', "after domain members");
    cur_.expect_punct('.', "after domain declaration");
    if (m().domains[dom].members.empty())
      throw ParseError{"empty domain '" + name.text + "'", name.line, name.column};
  }

  void add_member(DomainId dom, const std::string& symbol, std::set<ConstId>& seen,
                  const Token& at) {
    ConstId c = m().add_constant(symbol);
    if (!seen.insert(c).second)
      throw ParseError{"duplicate domain member '" + symbol + "'", at.line, at.column};
    m().domains[dom].members.push_back(c);
  }

  void parse_tensor() {
    cur_.get();
    Token name = cur_.expect(Tok::Ident, "constant name");
    auto it = m().constant_index.find(name.text);
    if (it == m().constant_index.end())
      throw ParseError{"tensor for undeclared constant '" + name.text + "'", name.line,
                       name.column};
    cur_.expect_punct('=', "in tensor declaration");
    cur_.expect_punct('[', "before tensor values");
    std::vector<double> vals;
    do {
      vals.push_back(cur_.number("in tensor"));
    } while (cur_.accept_punct(','));
    cur_.expect_punct(']', "after tensor values");
    cur_.expect_punct('.', "after tensor declaration");
    Eigen::VectorXd v(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) v(static_cast<Eigen::Index>(i)) = vals[i];
    m().constants[it->second].payload = v;
  }

  void parse_pred() {
    cur_.get();
    Token name = cur_.expect(Tok::Ident, "predicate name");
    PredicateSignature sig;
    sig.name = name.text;
    if (cur_.accept_punct('(')) {
      do {
        Token d = cur_.expect(Tok::Ident, "argument domain");
        auto it = m().domain_index.find(d.text);
        if (it == m().domain_index.end())
          throw ParseError{"unknown domain '" + d.text + "'", d.line, d.column};
        sig.domains.push_back(it->second);
      } while (cur_.accept_punct(','));
      cur_.expect_punct(')', "after predicate arguments");
    }
    cur_.expect_punct('.', "after predicate declaration");
    if (m().predicate_index.count(sig.name))
      throw ParseError{"duplicate predicate '" + sig.name + "'", name.line, name.column};
    m().add_predicate(std::move(sig));
  }

  void parse_truth() {
    cur_.get();
    Token t = cur_.expect(Tok::Ident, "truth domain (bool or fuzzy)");
    if (t.text == "bool") m().truth = TruthDomain::Boolean;
    else if (t.text == "fuzzy") m().truth = TruthDomain::Fuzzy;
    else throw ParseError{"truth domain must be bool or fuzzy", t.line, t.column};
    cur_.expect_punct('.', "after truth declaration");
  }

  PredId lookup_pred(const Token& t) {
    auto it = m().predicate_index.find(t.text);
    if (it == m().predicate_index.end())
      throw ParseError{"unknown predicate '" + t.text + "'", t.line, t.column};
    return it->second;
  }

  StructId lookup_struct(const Token& t) {
    auto it = m().structure_index.find(t.text);
    if (it == m().structure_index.end())
      throw ParseError{"structure '" + t.text + "' is not declared in this model", t.line,
                       t.column};
    return it->second;
  }

  void parse_label() {
    cur_.get();
    Token pname = cur_.expect(Tok::Ident, "predicate name");
    PredId pred = lookup_pred(pname);
    cur_.expect_punct('@', "in label declaration");
    Token sname = cur_.expect(Tok::Ident, "structure id");
    StructId sid = lookup_struct(sname);
    cur_.expect_punct(':', "in label declaration");
    Token kind = cur_.expect(Tok::Ident, "labelling kind");

    if (m().labelling.find(pred, sid))
      throw ParseError{"duplicate labelling entry for " + pname.text + " @ " + sname.text,
                       pname.line, pname.column};

    LabelEntry e;
    e.pred = pred;
    e.sid = sid;
    if (kind.text == "identity") {
      e.kind = LabelKind::Identity;
    } else if (kind.text == "table") {
      e.kind = LabelKind::Table;
      cur_.expect_punct('(', "after table");
      if (cur_.peek().kind == Tok::Float || cur_.peek().kind == Tok::Int ||
          (cur_.peek().kind == Tok::Punct && cur_.peek().text == "-")) {
        e.uniform_p = cur_.number("uniform table probability");
      } else {
        do {
          Token an = cur_.expect(Tok::Ident, "ground atom in table");
          if (an.text != pname.text)
            throw ParseError{"table entry names a different predicate", an.line, an.column};
          std::vector<ConstId> args = parse_ground_args(pred, an);
          cur_.expect_punct('=', "in table entry");
          double lo, hi;
          if (cur_.accept_punct('[')) {
            lo = cur_.number("false label");
            cur_.expect_punct(',', "between table labels");
            hi = cur_.number("true label");
            cur_.expect_punct(']', "after table labels");
          } else {
            hi = cur_.number("probability");
            lo = 1.0 - hi;
          }
          if (!e.table.emplace(args, std::make_pair(lo, hi)).second)
            throw ParseError{"duplicate labelling entry for a ground atom", an.line, an.column};
        } while (cur_.accept_punct(','));
      }
      cur_.expect_punct(')', "after table");
    } else if (kind.text == "categorical") {
      e.kind = LabelKind::Categorical;
      cur_.expect_punct('(', "after categorical");
      if (!cur_.accept_punct(')')) {
        parse_kv_options(e);
        cur_.expect_punct(')', "after categorical options");
      }
    } else if (kind.text == "perceptual") {
      e.kind = LabelKind::Perceptual;
      cur_.expect_punct('(', "after perceptual");
      parse_kv_options(e);
      cur_.expect_punct(')', "after perceptual options");
    } else {
      throw ParseError{"unknown labelling kind '" + kind.text + "'", kind.line, kind.column};
    }
    if (e.class_arg >= static_cast<int>(m().predicates[pred].arity()))
      throw ParseError{"class argument out of range", kind.line, kind.column};
    cur_.expect_punct('.', "after label declaration");
    m().labelling.entries.push_back(std::move(e));
  }

  void parse_kv_options(LabelEntry& e) {
    do {
      Token k = cur_.expect(Tok::Ident, "option name");
      cur_.expect_punct('=', "in option");
      long long v = static_cast<long long>(cur_.number("option value"));
      if (k.text == "dim") e.input_dim = static_cast<int>(v);
      else if (k.text == "hidden") e.hidden = static_cast<int>(v);
      else if (k.text == "class") e.class_arg = static_cast<int>(v) - 1;  // 1-based in files
      else throw ParseError{"unknown option '" + k.text + "'", k.line, k.column};
    } while (cur_.accept_punct(','));
  }

  std::vector<ConstId> parse_ground_args(PredId pred, const Token& at) {
    const auto& sig = m().predicates[pred];
    std::vector<ConstId> args;
    if (cur_.accept_punct('(')) {
      do {
        Token t = cur_.get();
        std::string sym;
        if (t.kind == Tok::Ident) sym = t.text;
        else if (t.kind == Tok::Int) sym = std::to_string(t.int_value);
        else throw ParseError{"expected constant", t.line, t.column};
        auto it = m().constant_index.find(sym);
        if (it == m().constant_index.end())
          throw ParseError{"constant outside domain: '" + sym + "'", t.line, t.column};
        args.push_back(it->second);
      } while (cur_.accept_punct(','));
      cur_.expect_punct(')', "after atom arguments");
    }
    if (args.size() != sig.arity())
      throw ParseError{"arity mismatch for " + sig.name, at.line, at.column};
    for (std::size_t i = 0; i < args.size(); ++i)
      if (!m().in_domain(sig.domains[i], args[i]))
        throw ParseError{"constant outside domain: '" + m().const_name(args[i]) + "'", at.line,
                         at.column};
    return args;
  }

  void parse_formula() {
    cur_.get();
    Token name = cur_.expect(Tok::Ident, "formula name");
    if (m().formula_index.count(name.text))
      throw ParseError{"duplicate formula '" + name.text + "'", name.line, name.column};
    NamedFormula nf;
    nf.name = name.text;
    params_.clear();
    if (cur_.accept_punct('(') && !cur_.accept_punct(')')) {
      do {
        Token v = cur_.expect(Tok::Var, "formula parameter");
        cur_.expect_punct(':', "after parameter name");
        Token d = cur_.expect(Tok::Ident, "parameter domain");
        auto it = m().domain_index.find(d.text);
        if (it == m().domain_index.end())
          throw ParseError{"unknown domain '" + d.text + "'", d.line, d.column};
        nf.params.emplace_back(v.text, it->second);
        params_[v.text] = it->second;
      } while (cur_.accept_punct(','));
      cur_.expect_punct(')', "after formula parameters");
    }
    if (!cur_.accept(Tok::Define)) cur_.error("expected ':=' in formula definition");
    nf.body = parse_expr();
    cur_.expect_punct('.', "after formula definition");
    m().formula_index[nf.name] = static_cast<int>(m().formulas.size());
    m().formulas.push_back(std::move(nf));
  }

  // expr := AGG<target> expr | additive
  FormulaPtr parse_expr() {
    const Token& t = cur_.peek();
    if (t.kind == Tok::Ident && cur_.peek(1).kind == Tok::Punct && cur_.peek(1).text == "<") {
      // transform<...>, op<struct>(...), or an aggregation prefix
      if (t.text == "transform") return parse_additive();
      if (is_op_call()) return parse_additive();
      return parse_aggregation();
    }
    return parse_additive();
  }

  // Distinguishes or<bool>(...) from an aggregation prefix like sum<b(V)>.
  bool is_op_call() const {
    const Token& inside = cur_.peek(2);
    return inside.kind == Tok::Ident && m().structure_index.count(inside.text) > 0 &&
           cur_.peek(3).kind == Tok::Punct && cur_.peek(3).text == ">";
  }

  FormulaPtr parse_aggregation() {
    Token agg = cur_.get();
    cur_.expect_punct('<', "after aggregator");
    if (cur_.peek().kind == Tok::Var && cur_.peek(1).kind == Tok::Ident &&
        cur_.peek(1).text == "in") {
      Token v = cur_.get();
      cur_.get();  // in
      Token d = cur_.expect(Tok::Ident, "aggregation domain");
      auto it = m().domain_index.find(d.text);
      if (it == m().domain_index.end())
        throw ParseError{"unknown domain '" + d.text + "'", d.line, d.column};
      cur_.expect_punct('>', "after aggregation binder");
      auto prev = params_.find(v.text);
      bool had = prev != params_.end();
      DomainId old = had ? prev->second : -1;
      params_[v.text] = it->second;
      FormulaPtr body = parse_expr();
      if (had) params_[v.text] = old; else params_.erase(v.text);
      return f_agg_var(body->sid, v.text, it->second, agg.text, body);
    }
    Atom pattern = parse_atom();
    cur_.expect_punct('>', "after aggregation binder");
    FormulaPtr body = parse_expr();
    return f_agg_atom(body->sid, std::move(pattern), agg.text, body);
  }

  FormulaPtr parse_additive() {
    FormulaPtr lhs = parse_multiplicative();
    while (true) {
      if (cur_.peek().kind == Tok::Punct && cur_.peek().text == "+") {
        Token op = cur_.get();
        FormulaPtr rhs = parse_multiplicative();
        lhs = make_binary(op, "+", lhs, rhs);
      } else if (cur_.peek().kind == Tok::Ident && cur_.peek().text == "or" &&
                 !(cur_.peek(1).kind == Tok::Punct && cur_.peek(1).text == "<")) {
        Token op = cur_.get();
        FormulaPtr rhs = parse_multiplicative();
        lhs = make_binary(op, "or", lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  FormulaPtr parse_multiplicative() {
    FormulaPtr lhs = parse_unary();
    while (true) {
      if (cur_.peek().kind == Tok::Punct && cur_.peek().text == "*") {
        Token op = cur_.get();
        FormulaPtr rhs = parse_unary();
        lhs = make_binary(op, "*", lhs, rhs);
      } else if (cur_.peek().kind == Tok::Ident && cur_.peek().text == "and" &&
                 !(cur_.peek(1).kind == Tok::Punct && cur_.peek(1).text == "<")) {
        Token op = cur_.get();
        FormulaPtr rhs = parse_unary();
        lhs = make_binary(op, "and", lhs, rhs);
      } else {
        return lhs;
      }
    }
  }

  std::string resolve_op(const Token& at, const std::string& surface, StructId sid,
                         bool is_binary) {
    const auto& st = m().structure(sid);
    auto pick = [&](const std::string& a, const std::string& b) -> std::string {
      if (is_binary ? st.has_binary(a) : st.has_unary(a)) return a;
      if (is_binary ? st.has_binary(b) : st.has_unary(b)) return b;
      throw ParseError{"structure " + st.name + " has no operator for '" + surface + "'",
                       at.line, at.column};
    };
    if (surface == "+") return pick("add", "or");
    if (surface == "*") return pick("mul", "and");
    if (surface == "or") return pick("or", "add");
    if (surface == "and") return pick("and", "mul");
    if (surface == "not") return pick("not", "not");
    throw ParseError{"unknown operator '" + surface + "'", at.line, at.column};
  }

  FormulaPtr make_binary(const Token& at, const std::string& surface, FormulaPtr l,
                         FormulaPtr r) {
    if (l->sid != r->sid)
      throw ParseError{"operands of '" + surface + "' live in different structures (" +
                           m().structures.at(l->sid) + " vs " + m().structures.at(r->sid) + ")",
                       at.line, at.column};
    return f_binary(l->sid, resolve_op(at, surface, l->sid, true), l, r);
  }

  FormulaPtr parse_unary() {
    const Token& t = cur_.peek();
    if (t.kind == Tok::Punct && t.text == "(") {
      cur_.get();
      FormulaPtr inner = parse_expr();
      cur_.expect_punct(')', "after parenthesized expression");
      return inner;
    }
    if (t.kind == Tok::Ident && t.text == "transform") {
      Token at = cur_.get();
      cur_.expect_punct('<', "after transform");
      Token target = cur_.expect(Tok::Ident, "target structure");
      StructId tid = lookup_struct(target);
      cur_.expect_punct(',', "in transform");
      Token tn = cur_.expect(Tok::Ident, "transformation name");
      cur_.expect_punct('>', "after transform header");
      cur_.expect_punct('(', "before transform argument");
      FormulaPtr child = parse_expr();
      cur_.expect_punct(')', "after transform argument");
      const Transformation& tr = transformation_by_name(tn.text);
      if (tr.target != target.text)
        throw ParseError{"transformation direction mismatch: " + tn.text + " targets " +
                             tr.target,
                         at.line, at.column};
      if (tr.source != m().structures.at(child->sid))
        throw ParseError{"transformation direction mismatch: " + tn.text + " expects " +
                             tr.source + ", child is " + m().structures.at(child->sid),
                         at.line, at.column};
      int id = m().add_transformation(tr);
      return f_transform(tid, id, child);
    }
    if (t.kind == Tok::Ident && t.text == "not" && cur_.peek(1).kind == Tok::Punct &&
        (cur_.peek(1).text == "(" || cur_.peek(1).text == "<")) {
      Token at = cur_.get();
      StructId forced = -1;
      if (cur_.accept_punct('<')) {
        Token s = cur_.expect(Tok::Ident, "structure id");
        forced = lookup_struct(s);
        cur_.expect_punct('>', "after structure tag");
      }
      cur_.expect_punct('(', "after not");
      FormulaPtr child = parse_expr();
      cur_.expect_punct(')', "after not argument");
      if (forced >= 0 && forced != child->sid)
        throw ParseError{"operand structure mismatch in not<...>", at.line, at.column};
      return f_unary(child->sid, resolve_op(at, "not", child->sid, false), child);
    }
    if (t.kind == Tok::Ident && cur_.peek(1).kind == Tok::Punct && cur_.peek(1).text == "<" &&
        is_op_call()) {
      Token op = cur_.get();
      cur_.get();  // <
      Token s = cur_.expect(Tok::Ident, "structure id");
      StructId sid = lookup_struct(s);
      cur_.expect_punct('>', "after structure tag");
      cur_.expect_punct('(', "after operator");
      FormulaPtr a = parse_expr();
      if (cur_.accept_punct(',')) {
        FormulaPtr b = parse_expr();
        cur_.expect_punct(')', "after operands");
        if (a->sid != sid || b->sid != sid)
          throw ParseError{"operand structure mismatch in " + op.text + "<" + s.text + ">",
                           op.line, op.column};
        return f_binary(sid, resolve_op(op, op.text, sid, true), a, b);
      }
      cur_.expect_punct(')', "after operand");
      if (a->sid != sid)
        throw ParseError{"operand structure mismatch in " + op.text + "<" + s.text + ">",
                         op.line, op.column};
      return f_unary(sid, resolve_op(op, op.text, sid, false), a);
    }
    // algebraic atom: pred(args)@struct
    Atom a = parse_atom();
    Token at = cur_.peek();
    cur_.expect_punct('@', "after atom (algebraic atoms carry @structure)");
    Token s = cur_.expect(Tok::Ident, "structure id");
    return f_atom(lookup_struct(s), std::move(a));
  }

  Atom parse_atom() {
    Token p = cur_.expect(Tok::Ident, "predicate name");
    Atom a;
    a.pred = lookup_pred(p);
    const auto& sig = m().predicates[a.pred];
    if (cur_.accept_punct('(')) {
      std::size_t pos = 0;
      do {
        Token t = cur_.get();
        if (t.kind == Tok::Var) {
          a.args.push_back(Term::make_var(t.text));
        } else if (t.kind == Tok::Ident || t.kind == Tok::Int) {
          std::string sym = t.kind == Tok::Int ? std::to_string(t.int_value) : t.text;
          auto it = m().constant_index.find(sym);
          if (it == m().constant_index.end())
            throw ParseError{"constant outside domain: '" + sym + "'", t.line, t.column};
          if (pos < sig.arity() && !m().in_domain(sig.domains[pos], it->second))
            throw ParseError{"constant outside domain: '" + sym + "'", t.line, t.column};
          a.args.push_back(Term::make_const(it->second));
        } else {
          throw ParseError{"expected a term", t.line, t.column};
        }
        ++pos;
      } while (cur_.accept_punct(','));
      cur_.expect_punct(')', "after atom arguments");
    }
    if (a.args.size() != sig.arity())
      throw ParseError{"arity mismatch for " + sig.name, p.line, p.column};
    return a;
  }

  void finalize() {
    // payload dimensions must agree within each domain
    for (const auto& d : result_.model.domains) {
      Eigen::Index dim = -1;
      for (ConstId c : d.members) {
        const auto& payload = result_.model.constants[c].payload;
        if (!payload) continue;
        if (dim < 0) dim = payload->size();
        else if (dim != payload->size())
          result_.diagnostics.push_back(
              {Diagnostic::Severity::Error,
               "payload dimension mismatch in domain '" + d.name + "'", 0, 0});
      }
    }
    if (!result_.ok()) return;
    auto diags = check_well_formed(result_.model);
    result_.diagnostics.insert(result_.diagnostics.end(), diags.begin(), diags.end());
  }

  TokenCursor cur_;
  ParseResult result_;
  std::map<std::string, DomainId> params_;
};

}  // namespace

ParseResult parse_model(const std::string& text) { return ModelParser(text).run(); }

Model parse_model_or_throw(const std::string& text) {
  ParseResult r = parse_model(text);
  if (!r.ok()) {
    std::string msg = "model parse failed:";
    for (const auto& d : r.diagnostics)
      if (d.severity == Diagnostic::Severity::Error)
        msg += "\n  " + std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message;
    fail(msg);
  }
  return std::move(r.model);
}

}  // namespace deeplog
