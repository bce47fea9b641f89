#pragma once

#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "deeplog/value.hpp"

namespace deeplog {

enum class StructureKind : std::uint8_t {
  Boolean,
  Probability,
  FuzzyGodel,
  FuzzyLukasiewicz,
  FuzzyProduct,
  Dual,
};

using UnaryFn = std::function<Value(const Value&)>;
using BinaryFn = std::function<Value(const Value&, const Value&)>;

/// Fold operator over value sequences: result = step(...step(step(init, v1), v2)...).
struct Aggregator {
  Value init;
  BinaryFn step;
};

/// Declared algebraic laws. Declaration is the contract; check_laws is the test.
struct Laws {
  std::set<std::string> commutative;
  std::set<std::string> associative;
  std::set<std::string> idempotent;
  std::map<std::string, Value> neutral;
  std::map<std::string, Value> annihilator;
  std::set<std::pair<std::string, std::string>> distributes;  // op1 over op2
};

struct AlgebraicStructure {
  std::string name;
  ValueKind value_kind = ValueKind::Real;
  StructureKind kind = StructureKind::Probability;
  std::map<std::string, UnaryFn> unary_ops;
  std::map<std::string, BinaryFn> binary_ops;
  std::map<std::string, Aggregator> aggregators;
  Laws laws;
  std::function<Value(std::mt19937_64&)> sample;

  const BinaryFn& binary(const std::string& op) const;
  const UnaryFn& unary(const std::string& op) const;
  const Aggregator& aggregator(const std::string& agg) const;
  bool has_binary(const std::string& op) const { return binary_ops.count(op) > 0; }
  bool has_unary(const std::string& op) const { return unary_ops.count(op) > 0; }
};

struct Transformation {
  std::string name;
  std::string source;  // structure name
  std::string target;
  UnaryFn map;
};

AlgebraicStructure make_boolean();
AlgebraicStructure make_probability();

enum class TNorm { Godel, Lukasiewicz, Product };
AlgebraicStructure make_fuzzy(TNorm kind);
AlgebraicStructure make_dual();

/// Lookup by external identifier: bool, prob, fuzzy:godel, fuzzy:lukasiewicz,
/// fuzzy:product, dual. Throws on unknown names.
const AlgebraicStructure& structure_by_name(const std::string& name);
bool is_known_structure(const std::string& name);

Transformation iverson();
const Transformation& transformation_by_name(const std::string& name);

struct LawCheck {
  std::string law;             // e.g. "commutative(and)"
  bool passed = true;
  std::string counterexample;  // empty when passed
};

/// Tests every declared law of `s` on `samples` random value tuples.
/// Failures are data, not errors.
std::vector<LawCheck> check_laws(const AlgebraicStructure& s, std::size_t samples,
                                 std::uint64_t seed = 0x5eedULL);

}  // namespace deeplog
