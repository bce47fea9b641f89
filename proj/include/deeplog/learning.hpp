#pragma once

#include <array>

#include "deeplog/circuit.hpp"

namespace deeplog {

/// Weak-supervision dataset: per-row slot payloads (or constants), a target
/// per row, and split tags. Per-digit ground truth is kept for diagnostics
/// only, never for training.
struct Dataset {
  std::int32_t rows = 0;
  std::vector<SlotData> slots;
  std::vector<double> real_targets;   // binary / fuzzy targets in [0, 1]
  std::vector<int> class_targets;     // categorical targets (answer index)
  std::vector<int> split;             // 0 = train, 1 = validation, 2 = test
  std::vector<std::vector<int>> latent_truth;  // diagnostic per-row labels

  std::vector<int> rows_of_split(int which) const;
  Batch gather(const std::vector<int>& row_ids) const;
};

enum class Semantics { Probabilistic, Fuzzy, ProbabilisticFuzzy };

struct TrainConfig {
  enum class Mode { Architecture, Loss };
  enum class LossKind { BinaryCrossEntropy, NegativeLogLikelihood, MeanSquaredError };
  enum class Optimizer { AdamW, Sgd };

  Mode mode = Mode::Architecture;
  LossKind loss = LossKind::NegativeLogLikelihood;
  Optimizer optimizer = Optimizer::AdamW;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int batch_size = 16;
  int max_epochs = 200;
  int patience = 5;
  std::uint64_t seed = 0;
};

/// A differentiable training objective over a parameter store: mean loss of
/// a row subset, with reverse-mode gradients accumulated on demand.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double loss(const std::vector<int>& row_ids, ParameterStore& params,
                      bool with_grad) = 0;
  /// Predicted scores per row (columns = answers, or one column for binary).
  virtual Eigen::MatrixXd predict(const std::vector<int>& row_ids,
                                  const ParameterStore& params) = 0;
};

/// Logic in the architecture: the answer distribution is computed by the
/// compiled circuits, so predictions satisfy the rules by construction.
/// `answer_circuit` holds one root per answer (a single root for binary
/// targets). Fuzzy semantics train with MSE, probabilistic with NLL/BCE.
class ArchitectureObjective final : public Objective {
 public:
  ArchitectureObjective(const Model& m, Circuit answer_circuit, const Dataset& data,
                        Semantics semantics, TrainConfig::LossKind loss_kind,
                        ExpectedFuzzyConfig sampling = {});
  double loss(const std::vector<int>& row_ids, ParameterStore& params, bool with_grad) override;
  Eigen::MatrixXd predict(const std::vector<int>& row_ids,
                          const ParameterStore& params) override;
  const Circuit& circuit() const { return circuit_; }

 private:
  const Model& model_;
  Circuit circuit_;
  Layerization plan_;
  const Dataset& data_;
  Semantics semantics_;
  TrainConfig::LossKind loss_kind_;
  ExpectedFuzzyConfig sampling_;
  std::uint64_t sample_round_ = 0;
};

/// Logic in the loss: a direct task head (the labelling entry named by
/// `head_entry`) is trained supervised, plus an unweighted semantic penalty
/// 1 - agreement(head, rules) per example.
class LossModeObjective final : public Objective {
 public:
  LossModeObjective(const Model& m, std::int32_t head_entry, Circuit answer_circuit,
                    const Dataset& data, Semantics semantics);
  double loss(const std::vector<int>& row_ids, ParameterStore& params, bool with_grad) override;
  Eigen::MatrixXd predict(const std::vector<int>& row_ids,
                          const ParameterStore& params) override;

 private:
  Eigen::MatrixXd head_scores(const std::vector<int>& row_ids, const ParameterStore& params,
                              EvalWorkspace* ws) const;
  const Model& model_;
  std::int32_t head_entry_;
  Circuit agreement_;  // one root: sum_s head_s (x) rules_s
  Layerization plan_;
  const Dataset& data_;
  Semantics semantics_;
};

struct TrainResult {
  std::vector<std::array<double, 3>> history;  // epoch, train loss, validation loss
  double best_validation = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

/// Minibatch descent with early stopping on the validation loss. Restores
/// the best-validation parameters into `params`. Deterministic per seed;
/// non-finite losses abort with a diagnostic.
TrainResult train(Objective& objective, ParameterStore& params, const Dataset& data,
                  const TrainConfig& config);

/// Accuracy of argmax predictions over mutually exclusive answers.
double accuracy(const Eigen::MatrixXd& scores, const std::vector<int>& targets);

/// Average precision over a ranking by descending score, ties broken by row
/// index; the mean of precision-at-rank over the positive rows.
double average_precision(const Eigen::VectorXd& scores, const std::vector<int>& labels);

/// Central finite differences (h = 1e-6) on random coordinates against the
/// reverse-mode gradient; returns the maximum relative error.
double finite_difference_check(Objective& objective, ParameterStore& params,
                               const std::vector<int>& row_ids, int probes,
                               std::uint64_t seed = 0);

/// Replays circuits through one builder so answer circuits share structure;
/// the result has one root per input circuit.
Circuit merge_circuits(const Model& m, const std::vector<Circuit>& circuits,
                       const std::string& name);

/// Single-root slice of a multi-root circuit.
Circuit extract_root(const Model& m, const Circuit& c, std::size_t root_index);

}  // namespace deeplog
