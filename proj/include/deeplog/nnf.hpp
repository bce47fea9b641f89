#pragma once

#include <unordered_map>
#include <vector>

#include "deeplog/language.hpp"

namespace deeplog {

using NnfId = std::int32_t;
constexpr NnfId kNnfFalse = 0;
constexpr NnfId kNnfTrue = 1;

/// Negation normal form node; negation appears only on literals.
struct NnfNode {
  enum class Kind : std::uint8_t { False, True, Lit, And, Or };
  Kind kind = Kind::False;
  std::int32_t var = -1;  // Lit
  bool positive = true;   // Lit
  std::vector<NnfId> kids;
  std::int32_t varset = 0;  // interned sorted var list
};

/// Hash-consed NNF DAG. Construction canonicalizes: nested same-kind children
/// are flattened, constants folded, duplicate children merged (idempotency),
/// children sorted by id. Identical subformulas share one node.
class NnfManager {
 public:
  NnfManager();

  NnfId lit(std::int32_t var, bool positive);
  NnfId mk_and(std::vector<NnfId> kids);
  NnfId mk_or(std::vector<NnfId> kids);
  NnfId negate(NnfId id);

  /// Substitutes a truth value for a variable and simplifies. Memoized.
  NnfId condition(NnfId id, std::int32_t var, bool value);

  const NnfNode& node(NnfId id) const { return nodes_[id]; }
  const std::vector<std::int32_t>& vars(NnfId id) const {
    return varsets_[nodes_[id].varset];
  }
  std::size_t size() const { return nodes_.size(); }
  std::size_t reachable_size(NnfId root) const;

  /// Truth value under a total assignment indexed by variable.
  bool evaluate(NnfId id, const std::vector<char>& assignment) const;

 private:
  NnfId intern(NnfNode n);
  std::int32_t intern_varset(std::vector<std::int32_t> vs);

  std::vector<NnfNode> nodes_;
  std::vector<std::vector<std::int32_t>> varsets_;
  std::unordered_map<std::uint64_t, std::vector<NnfId>> cons_;
  std::map<std::vector<std::int32_t>, std::int32_t> varset_index_;
  std::unordered_map<std::uint64_t, NnfId> condition_memo_;
};

/// A Boolean formula translated to NNF, with its atom table.
struct BoolNnf {
  NnfManager mgr;
  NnfId root = kNnfFalse;
  std::vector<Atom> var_atoms;        // var index -> source atom
  std::vector<std::int64_t> var_occurrences;  // literal occurrences in the source

  std::int32_t var_of(const Model& m, const Atom& a);  // adds if missing
};

/// Rewrites a purely Boolean formula (and, or, not over Boolean atoms) into
/// negation normal form. Non-Boolean nodes are an error.
BoolNnf to_nnf(const Model& m, const FormulaPtr& f);

/// Deterministic compiler atom order: descending occurrence count, ties by
/// Herbrand order of the atoms.
std::vector<std::int32_t> default_atom_order(const Model& m, const BoolNnf& nnf);

/// Shannon expansion with hash-consing, producing a smooth d-DNNF: each or is
/// a decision x & f|x  |  !x & f|!x, branches padded with (a | !a) units so
/// both mention identical atom sets. Guarded at 1e6 nodes.
NnfId shannon_compile(BoolNnf& nnf, const std::vector<std::int32_t>& order);

struct DdnnfReport {
  bool decomposable = false;
  bool deterministic = false;
  bool smooth = false;
  bool ok() const { return decomposable && deterministic && smooth; }
};

/// Structural checks for decomposability and smoothness; determinism checked
/// structurally for Shannon splits and by model enumeration otherwise
/// (up to 20 atoms per disjunction).
DdnnfReport check_d_dnnf(const NnfManager& mgr, NnfId root);

/// Weighted count of a smooth deterministic d-DNNF: literals map to the given
/// per-variable (false, true) weights, and -> product, or -> sum.
double ddnnf_wmc(const NnfManager& mgr, NnfId root,
                 const std::vector<std::pair<double, double>>& weights);

}  // namespace deeplog
