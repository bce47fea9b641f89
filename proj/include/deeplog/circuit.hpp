#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <random>
#include <unordered_map>

#include "deeplog/dual.hpp"
#include "deeplog/language.hpp"
#include "deeplog/oracle.hpp"

namespace deeplog {

enum class OpCode : std::uint8_t { Or, And, Not, Add, Mul };

OpCode opcode_of(const AlgebraicStructure& s, const std::string& op_name);
const char* opcode_name(OpCode op);

/// Leaf-atom argument: a fixed constant or a formula input filled per batch row.
struct ArgRef {
  bool is_slot = false;
  std::int32_t value = -1;  // ConstId or slot index

  static ArgRef constant(ConstId c) { return ArgRef{false, c}; }
  static ArgRef slot(std::int32_t s) { return ArgRef{true, s}; }
  bool operator==(const ArgRef& o) const = default;
  auto operator<=>(const ArgRef& o) const = default;
};

struct LeafAtom {
  PredId pred = -1;
  std::vector<ArgRef> args;
  bool operator==(const LeafAtom& o) const = default;
  auto operator<=>(const LeafAtom& o) const = default;
};

/// Labelling reference of a circuit leaf: the labelling entry, the atom
/// instance, and the component to read (class index within a categorical
/// group; 0=false / 1=true for truth-valued entries).
struct LeafRef {
  std::int32_t entry = -1;
  LeafAtom atom;
  std::int32_t component = 0;
  bool operator==(const LeafRef& o) const = default;
  auto operator<=>(const LeafRef& o) const = default;
};

struct CircuitNode {
  enum class Kind : std::uint8_t { Leaf, Op, Transform, Const };
  Kind kind = Kind::Const;
  OpCode op = OpCode::Add;
  StructId sid = -1;
  std::int32_t a = -1;  // Leaf: leaf index; Const: const index; Transform: child; Op: kids offset
  std::int32_t b = 0;   // Op: kid count; Transform: transformation index
};

/// Flat, topologically sorted circuit DAG: children always precede parents.
/// Interpreted against the model it was compiled from.
struct Circuit {
  std::string name;
  std::vector<std::string> structures;       // same ids as the source model
  std::vector<std::string> transformations;  // same ids as the source model
  std::vector<std::string> slots;            // formula inputs, by slot index
  std::vector<CircuitNode> nodes;
  std::vector<std::int32_t> kids;
  std::vector<LeafRef> leaves;
  std::vector<Value> consts;
  std::vector<std::int32_t> roots;

  std::size_t size() const { return nodes.size(); }
  StructId root_sid() const;
  std::pair<const std::int32_t*, std::int32_t> node_kids(std::int32_t n) const {
    const CircuitNode& nd = nodes[n];
    if (nd.kind == CircuitNode::Kind::Op) return {kids.data() + nd.a, nd.b};
    if (nd.kind == CircuitNode::Kind::Transform) return {&nd.a, 1};
    return {nullptr, 0};
  }
};

class CircuitBuilder {
 public:
  explicit CircuitBuilder(const Model& m);

  std::int32_t leaf(std::int32_t entry, LeafAtom atom, std::int32_t component);
  std::int32_t constant(StructId sid, Value v);
  /// Hash-consed operator application. Non-probability structures only take
  /// two children (reverse mode needs binary chains for their partials).
  std::int32_t op(StructId sid, OpCode code, std::vector<std::int32_t> operands);
  /// Like op(), but folds constants and applies neutral/annihilator shortcuts.
  std::int32_t fold_op(StructId sid, OpCode code, std::vector<std::int32_t> operands);
  std::int32_t transform(StructId sid, std::int32_t transform_index, std::int32_t child);
  void add_root(std::int32_t id);

  const CircuitNode& node(std::int32_t id) const { return circuit_.nodes[id]; }
  const Value& const_value(std::int32_t id) const { return circuit_.consts[circuit_.nodes[id].a]; }
  bool is_const(std::int32_t id, double v) const;
  std::size_t size() const { return circuit_.size(); }

  Circuit finish(std::string name, std::vector<std::string> slot_names);

 private:
  std::int32_t intern(CircuitNode n);
  const Model& model_;
  Circuit circuit_;
  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> cons_;
  std::map<LeafRef, std::int32_t> leaf_index_;
  std::map<std::pair<StructId, std::pair<double, double>>, std::int32_t> const_index_;
};

/// Combines two circuits under an operator: nodes are concatenated and a new
/// root applies `op` over the two old roots.
Circuit compose(const Circuit& c1, const Circuit& c2, const std::string& op_name,
                const std::string& structure);

// ---------------------------------------------------------------------------
// Parameters

struct PerceptualParams {
  Eigen::MatrixXd w1, w2;
  Eigen::VectorXd b1, b2;
  Eigen::MatrixXd gw1, gw2;
  Eigen::VectorXd gb1, gb2;
};

struct CategoricalParams {
  std::map<std::vector<ConstId>, std::int32_t> instance_index;
  Eigen::MatrixXd logits;   // instances x classes
  Eigen::MatrixXd glogits;
};

struct ParamBlock {
  std::string name;
  std::int32_t entry = -1;
  LabelKind kind = LabelKind::Categorical;
  std::int32_t classes = 0;
  std::optional<PerceptualParams> perceptual;
  std::optional<CategoricalParams> categorical;
};

/// Learnable leaf parameters: categorical logits and perceptual weights, with
/// gradient accumulators of identical shape. Single-writer during training.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const Model& m, std::uint64_t seed);

  std::size_t num_params() const { return values_.size(); }
  double get(std::size_t i) const { return *values_[i]; }
  void set(std::size_t i, double v) { *values_[i] = v; }
  double grad(std::size_t i) const { return *grads_[i]; }
  void set_grad(std::size_t i, double v) { *grads_[i] = v; }
  void zero_grad();

  const ParamBlock* block_for_entry(std::int32_t entry) const;
  ParamBlock* block_for_entry(std::int32_t entry);
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  /// Index of the parameter behind pointer arithmetic-free access for
  /// forward-mode seeding; maps a flat index to (value, grad) slots.
  const double* value_ptr(std::size_t i) const { return values_[i]; }

  void save(std::ostream& os) const;
  static ParameterStore load(std::istream& is, const Model& m);

 private:
  void index_block(ParamBlock& b);
  std::vector<ParamBlock> blocks_;
  std::vector<double*> values_;
  std::vector<double*> grads_;
};

/// Leaf resolver covering parametric labellings: identity and tables behave
/// like TableResolver; categorical and perceptual entries read softmax scores
/// from the store. Class-grouped atoms weigh (score, 1) for (true, false).
struct StoreResolver final : LeafResolver {
  const ParameterStore* store = nullptr;
  explicit StoreResolver(const ParameterStore& s) : store(&s) {}
  Value label(const Model& m, const GroundAtom& atom, StructId sid,
              const Value& truth) const override;
};

// ---------------------------------------------------------------------------
// Batched evaluation

struct SlotData {
  std::optional<Eigen::MatrixXd> payloads;          // rows x dim
  std::optional<std::vector<ConstId>> constants;    // rows
};

struct Batch {
  std::int32_t rows = 1;
  std::vector<SlotData> slots;

  static Batch single() { return Batch{}; }
};

/// One softmax unit shared by the leaves of a labelling-entry group instance.
struct LeafGroup {
  std::int32_t entry = -1;
  std::vector<ArgRef> group_args;  // class argument removed
  std::int32_t classes = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> outputs;  // (node, component)
};

struct OpGroup {
  CircuitNode::Kind kind = CircuitNode::Kind::Op;
  StructureKind skind = StructureKind::Probability;
  OpCode op = OpCode::Add;
  std::int32_t transform = -1;
  std::vector<std::int32_t> members;
};

/// Evaluation plan: nodes sliced into layers by longest-path depth, each
/// layer grouped by kernel; pure data, no per-node dispatch at run time.
struct Layerization {
  std::vector<std::vector<OpGroup>> layers;  // depth >= 1
  std::vector<std::int32_t> depth;
  std::vector<std::int32_t> const_nodes;
  std::vector<LeafGroup> leaf_groups;
  std::vector<std::int32_t> leaf_group_of;  // per leaf index
  std::size_t num_layers() const { return layers.size() + 1; }
};

Layerization layerize(const Model& m, const Circuit& c);

/// Optional per-entry logit perturbation (sampled-expectation mode) and leaf
/// score overrides keyed by leaf-group index.
struct LeafNoise {
  std::map<std::int32_t, Eigen::MatrixXd> logit_noise;  // group -> rows x classes
  std::map<std::int32_t, Eigen::MatrixXd> score_override;
};

struct GroupCache {
  Eigen::MatrixXd inputs;   // perceptual payloads (rows x dim)
  Eigen::MatrixXd hidden;   // tanh activations, when a hidden layer exists
  Eigen::MatrixXd scores;   // softmax outputs (rows x classes)
  std::vector<std::int32_t> row_instance;  // categorical instance per row
};

struct EvalWorkspace {
  Eigen::ArrayXXd values;  // rows x nodes
  std::vector<GroupCache> groups;
};

Eigen::MatrixXd eval_forward(const Model& m, const Circuit& c, const Layerization& plan,
                             const ParameterStore& params, const Batch& batch,
                             EvalWorkspace* ws = nullptr, const LeafNoise* noise = nullptr);

/// Reverse-mode accumulation into the store's gradient buffers. `upstream`
/// is rows x roots; forward values are taken from `ws` (filled by
/// eval_forward). Boolean circuits are rejected.
void eval_gradient(const Model& m, const Circuit& c, const Layerization& plan,
                   ParameterStore& params, const Batch& batch,
                   const Eigen::MatrixXd& upstream, const EvalWorkspace& ws,
                   const LeafNoise* noise = nullptr);

/// Recursive single-row evaluation with per-call memo and per-node dispatch:
/// the baseline the layered engine is benchmarked against.
Eigen::MatrixXd eval_naive(const Model& m, const Circuit& c, const ParameterStore& params,
                           const Batch& batch);

/// Forward-mode derivative of every root w.r.t. parameter `param_index`.
Eigen::MatrixXd eval_dual_derivative(const Model& m, const Circuit& c,
                                     const ParameterStore& params, const Batch& batch,
                                     std::size_t param_index, Eigen::MatrixXd* primal = nullptr);

enum class LeafDist { Dirac, LogitNormal, Uniform };

struct ExpectedFuzzyConfig {
  LeafDist dist = LeafDist::Dirac;
  double sigma = 0.0;
  std::int32_t samples = 1;
  std::uint64_t seed = 0;
};

/// Monte-Carlo mean of forward evaluations under a distribution over leaf
/// scores. Dirac with one sample reduces exactly to eval_forward.
Eigen::MatrixXd eval_expected_fuzzy(const Model& m, const Circuit& c, const Layerization& plan,
                                    const ParameterStore& params, const Batch& batch,
                                    const ExpectedFuzzyConfig& config);

// ---------------------------------------------------------------------------
// Serialization: versioned binary with a text header (DLC1).

void serialize(const Circuit& c, std::ostream& os);
Circuit deserialize(std::istream& is);

/// Bundles the model text, the circuit, and an optional parameter snapshot.
void save_circuit_file(const std::string& path, const Model& m, const Circuit& c,
                       const ParameterStore* params = nullptr);
struct CircuitFile {
  Model model;
  Circuit circuit;
  ParameterStore params;
  bool has_params = false;
};
CircuitFile load_circuit_file(const std::string& path);

}  // namespace deeplog
