#include "deeplog/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deeplog {

const BinaryFn& AlgebraicStructure::binary(const std::string& op) const {
  auto it = binary_ops.find(op);
  if (it == binary_ops.end()) fail("structure '" + name + "' has no binary operator '" + op + "'");
  return it->second;
}

const UnaryFn& AlgebraicStructure::unary(const std::string& op) const {
  auto it = unary_ops.find(op);
  if (it == unary_ops.end()) fail("structure '" + name + "' has no unary operator '" + op + "'");
  return it->second;
}

const Aggregator& AlgebraicStructure::aggregator(const std::string& agg) const {
  auto it = aggregators.find(agg);
  if (it == aggregators.end()) fail("structure '" + name + "' has no aggregator '" + agg + "'");
  return it->second;
}

namespace {

void expect_kind(const Value& v, ValueKind k, const char* where) {
  if (v.kind != k) fail(std::string(where) + ": operand kind " + to_string(v.kind) +
                        ", expected " + to_string(k));
}

}  // namespace

AlgebraicStructure make_boolean() {
  AlgebraicStructure s;
  s.name = "bool";
  s.value_kind = ValueKind::Boolean;
  s.kind = StructureKind::Boolean;
  s.unary_ops["not"] = [](const Value& x) {
    expect_kind(x, ValueKind::Boolean, "not");
    return Value::boolean(!x.truthy());
  };
  s.binary_ops["or"] = [](const Value& x, const Value& y) {
    return Value::boolean(x.truthy() || y.truthy());
  };
  s.binary_ops["and"] = [](const Value& x, const Value& y) {
    return Value::boolean(x.truthy() && y.truthy());
  };
  s.aggregators["any"] = Aggregator{Value::boolean(false), s.binary_ops["or"]};
  s.aggregators["all"] = Aggregator{Value::boolean(true), s.binary_ops["and"]};
  s.laws.commutative = {"or", "and"};
  s.laws.associative = {"or", "and"};
  s.laws.idempotent = {"or", "and"};
  s.laws.neutral["or"] = Value::boolean(false);
  s.laws.neutral["and"] = Value::boolean(true);
  s.laws.annihilator["or"] = Value::boolean(true);
  s.laws.annihilator["and"] = Value::boolean(false);
  s.laws.distributes.insert({"and", "or"});
  s.laws.distributes.insert({"or", "and"});
  s.sample = [](std::mt19937_64& rng) {
    return Value::boolean(std::uniform_int_distribution<int>(0, 1)(rng) == 1);
  };
  return s;
}

AlgebraicStructure make_probability() {
  AlgebraicStructure s;
  s.name = "prob";
  s.value_kind = ValueKind::Real;
  s.kind = StructureKind::Probability;
  s.binary_ops["add"] = [](const Value& x, const Value& y) { return Value::real(x.a + y.a); };
  s.binary_ops["mul"] = [](const Value& x, const Value& y) { return Value::real(x.a * y.a); };
  s.aggregators["sum"] = Aggregator{Value::real(0.0), s.binary_ops["add"]};
  s.laws.commutative = {"add", "mul"};
  s.laws.associative = {"add", "mul"};
  s.laws.neutral["add"] = Value::real(0.0);
  s.laws.neutral["mul"] = Value::real(1.0);
  s.laws.annihilator["mul"] = Value::real(0.0);
  s.laws.distributes.insert({"mul", "add"});
  s.sample = [](std::mt19937_64& rng) {
    return Value::real(std::uniform_real_distribution<double>(0.0, 2.0)(rng));
  };
  return s;
}

AlgebraicStructure make_fuzzy(TNorm kind) {
  AlgebraicStructure s;
  s.value_kind = ValueKind::Fuzzy;
  switch (kind) {
    case TNorm::Godel:
      s.name = "fuzzy:godel";
      s.kind = StructureKind::FuzzyGodel;
      s.binary_ops["and"] = [](const Value& x, const Value& y) {
        return Value::fuzzy(std::min(x.a, y.a));
      };
      s.binary_ops["or"] = [](const Value& x, const Value& y) {
        return Value::fuzzy(std::max(x.a, y.a));
      };
      s.laws.idempotent = {"and", "or"};
      s.laws.distributes.insert({"and", "or"});
      s.laws.distributes.insert({"or", "and"});
      break;
    case TNorm::Lukasiewicz:
      s.name = "fuzzy:lukasiewicz";
      s.kind = StructureKind::FuzzyLukasiewicz;
      s.binary_ops["and"] = [](const Value& x, const Value& y) {
        return Value::fuzzy(std::max(0.0, x.a + y.a - 1.0));
      };
      s.binary_ops["or"] = [](const Value& x, const Value& y) {
        return Value::fuzzy(std::min(1.0, x.a + y.a));
      };
      break;
    case TNorm::Product:
      s.name = "fuzzy:product";
      s.kind = StructureKind::FuzzyProduct;
      s.binary_ops["and"] = [](const Value& x, const Value& y) {
        return Value::fuzzy(x.a * y.a);
      };
      s.binary_ops["or"] = [](const Value& x, const Value& y) {
        return Value::fuzzy(x.a + y.a - x.a * y.a);
      };
      break;
  }
  s.unary_ops["not"] = [](const Value& x) { return Value::fuzzy(1.0 - x.a); };
  s.aggregators["or"] = Aggregator{Value::fuzzy(0.0), s.binary_ops["or"]};
  s.aggregators["and"] = Aggregator{Value::fuzzy(1.0), s.binary_ops["and"]};
  s.laws.commutative = {"and", "or"};
  s.laws.associative = {"and", "or"};
  s.laws.neutral["and"] = Value::fuzzy(1.0);
  s.laws.neutral["or"] = Value::fuzzy(0.0);
  s.laws.annihilator["and"] = Value::fuzzy(0.0);
  s.laws.annihilator["or"] = Value::fuzzy(1.0);
  s.sample = [](std::mt19937_64& rng) {
    return Value::fuzzy(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
  };
  return s;
}

AlgebraicStructure make_dual() {
  AlgebraicStructure s;
  s.name = "dual";
  s.value_kind = ValueKind::Dual;
  s.kind = StructureKind::Dual;
  s.binary_ops["add"] = [](const Value& x, const Value& y) {
    return Value::dual(x.a + y.a, x.b + y.b);
  };
  s.binary_ops["mul"] = [](const Value& x, const Value& y) {
    return Value::dual(x.a * y.a, x.a * y.b + x.b * y.a);
  };
  s.aggregators["sum"] = Aggregator{Value::dual(0.0, 0.0), s.binary_ops["add"]};
  s.laws.commutative = {"add", "mul"};
  s.laws.associative = {"add", "mul"};
  s.laws.neutral["add"] = Value::dual(0.0, 0.0);
  s.laws.neutral["mul"] = Value::dual(1.0, 0.0);
  s.laws.annihilator["mul"] = Value::dual(0.0, 0.0);
  s.laws.distributes.insert({"mul", "add"});
  s.sample = [](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    double p = d(rng), t = d(rng);
    return Value::dual(p, t);
  };
  return s;
}

const AlgebraicStructure& structure_by_name(const std::string& name) {
  static const std::map<std::string, AlgebraicStructure> registry = [] {
    std::map<std::string, AlgebraicStructure> m;
    m["bool"] = make_boolean();
    m["prob"] = make_probability();
    m["fuzzy:godel"] = make_fuzzy(TNorm::Godel);
    m["fuzzy:lukasiewicz"] = make_fuzzy(TNorm::Lukasiewicz);
    m["fuzzy:product"] = make_fuzzy(TNorm::Product);
    m["dual"] = make_dual();
    return m;
  }();
  auto it = registry.find(name);
  if (it == registry.end()) fail("unknown structure id '" + name + "'");
  return it->second;
}

bool is_known_structure(const std::string& name) {
  static const std::set<std::string> known = {
      "bool", "prob", "fuzzy:godel", "fuzzy:lukasiewicz", "fuzzy:product", "dual"};
  return known.count(name) > 0;
}

Transformation iverson() {
  Transformation t;
  t.name = "iverson";
  t.source = "bool";
  t.target = "prob";
  t.map = [](const Value& x) {
    expect_kind(x, ValueKind::Boolean, "iverson");
    return Value::real(x.truthy() ? 1.0 : 0.0);
  };
  return t;
}

const Transformation& transformation_by_name(const std::string& name) {
  static const std::map<std::string, Transformation> registry = [] {
    std::map<std::string, Transformation> m;
    m["iverson"] = iverson();
    return m;
  }();
  auto it = registry.find(name);
  if (it == registry.end()) fail("unknown transformation '" + name + "'");
  return it->second;
}

namespace {

std::string show_tuple(const std::vector<Value>& vs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < vs.size(); ++i) os << (i ? ", " : "") << vs[i].str();
  return os.str();
}

}  // namespace

std::vector<LawCheck> check_laws(const AlgebraicStructure& s, std::size_t samples,
                                 std::uint64_t seed) {
  if (samples < 1) fail("check_laws: samples must be >= 1");
  std::vector<LawCheck> report;
  std::mt19937_64 rng(seed);
  auto draw = [&] { return s.sample(rng); };
  constexpr double kTol = 1e-9;

  auto run = [&](const std::string& law, auto&& trial) {
    LawCheck c{law, true, ""};
    for (std::size_t i = 0; i < samples; ++i) {
      auto [ok, witness] = trial();
      if (!ok) {
        c.passed = false;
        c.counterexample = witness;
        break;
      }
    }
    report.push_back(std::move(c));
  };

  for (const auto& op : s.laws.commutative) {
    const auto& f = s.binary(op);
    run("commutative(" + op + ")", [&] {
      Value x = draw(), y = draw();
      bool ok = approx_equal(f(x, y), f(y, x), kTol);
      return std::pair{ok, show_tuple({x, y})};
    });
  }
  for (const auto& op : s.laws.associative) {
    const auto& f = s.binary(op);
    run("associative(" + op + ")", [&] {
      Value x = draw(), y = draw(), z = draw();
      bool ok = approx_equal(f(f(x, y), z), f(x, f(y, z)), kTol);
      return std::pair{ok, show_tuple({x, y, z})};
    });
  }
  for (const auto& op : s.laws.idempotent) {
    const auto& f = s.binary(op);
    run("idempotent(" + op + ")", [&] {
      Value x = draw();
      bool ok = approx_equal(f(x, x), x, kTol);
      return std::pair{ok, show_tuple({x})};
    });
  }
  for (const auto& [op, e] : s.laws.neutral) {
    const auto& f = s.binary(op);
    run("neutral(" + op + ")=" + e.str(), [&] {
      Value x = draw();
      bool ok = approx_equal(f(x, e), x, kTol) && approx_equal(f(e, x), x, kTol);
      return std::pair{ok, show_tuple({x})};
    });
  }
  for (const auto& [op, z] : s.laws.annihilator) {
    const auto& f = s.binary(op);
    run("annihilator(" + op + ")=" + z.str(), [&] {
      Value x = draw();
      bool ok = approx_equal(f(x, z), z, kTol) && approx_equal(f(z, x), z, kTol);
      return std::pair{ok, show_tuple({x})};
    });
  }
  for (const auto& [op1, op2] : s.laws.distributes) {
    const auto& f = s.binary(op1);
    const auto& g = s.binary(op2);
    run("distributes(" + op1 + "," + op2 + ")", [&] {
      Value x = draw(), y = draw(), z = draw();
      bool ok = approx_equal(f(x, g(y, z)), g(f(x, y), f(x, z)), kTol) &&
                approx_equal(f(g(y, z), x), g(f(y, x), f(z, x)), kTol);
      return std::pair{ok, show_tuple({x, y, z})};
    });
  }
  return report;
}

}  // namespace deeplog
