#pragma once

#include "deeplog/learning.hpp"
#include "deeplog/program.hpp"

namespace deeplog {

/// Bundled logic programs for the addition task (placeholder image constants
/// img0..img{2n-1}; lifted to input slots at compilation).
std::string addition_program(int digits, const std::string& encoding);

/// (cell payloads, validity label) boards for the 4x4 grid; balanced between
/// valid and invalid, labels from the direct checker.
Dataset make_sudoku_data(int n, int count, std::uint64_t seed);

/// Pairs of digit payload sequences with the sum as target; per-digit ground
/// truth retained for diagnostics only.
Dataset make_addition_data(int digits, int count, std::uint64_t seed);

Dataset make_alarm_data(int count, std::uint64_t seed);

/// Direct validity checker: rows, columns and 2x2 boxes all different.
bool sudoku_valid(const std::vector<int>& board);

struct TaskSpec {
  std::string task = "mnist-add";  // mnist-add | sudoku4 | alarm
  int digits = 1;
  std::string encoding = "original";  // original | carry
  Semantics semantics = Semantics::Probabilistic;
  TNorm tnorm = TNorm::Product;
  TrainConfig::Mode mode = TrainConfig::Mode::Architecture;
  std::uint64_t seed = 0;
  int data_rows = 1500;
  TrainConfig train;  // optimizer settings; loss kind is derived from semantics
  int samples = 8;    // probabilistic-fuzzy draws
  double sigma = 0.25;
  int hidden = 0;     // perceptual width (0 = affine)
};

struct TaskMetrics {
  std::string task, semantics, mode, metric;
  std::uint64_t seed = 0;
  double value = 0.0;             // accuracy or average precision on test
  double latent_accuracy = 0.0;   // diagnostic: per-digit / per-cell accuracy
  double prediction_entropy = 0.0;
  double train_seconds = 0.0;
  int epochs = 0;
  std::string csv_row() const;
  static std::string csv_header();
};

/// Compiled addition task: one circuit root per reachable sum, plus the
/// query metadata needed for training and evaluation.
struct AdditionTask {
  Frontend frontend;
  std::vector<long long> answers;  // sums, ascending
  Circuit circuit;                 // one root per answer
  std::vector<std::size_t> ground_query_atoms;  // per bundled query
};

/// Builds the answer-set circuit for the sum query under the chosen
/// semantics. For the carry encoding the bundled queries are the carry-out
/// and the per-position sum digits.
AdditionTask build_addition_task(int digits, const std::string& encoding, Semantics semantics,
                                 TNorm tnorm, int hidden = 0);

/// Per-position answer circuits of the carry encoding (carry-out first, then
/// sum digits most-significant first), used for per-digit training.
struct CarryHeads {
  Frontend frontend;
  std::vector<Circuit> circuits;        // one per query
  std::vector<std::vector<long long>> answers;
};
CarryHeads build_carry_heads(int digits, Semantics semantics, TNorm tnorm, int hidden = 0);

/// Full-sum distribution of the carry encoding via conjunctions of the
/// per-position queries; answers aligned with `sums`.
Circuit build_carry_joint_circuit(Frontend& fe, int digits,
                                  const std::vector<long long>& sums);

struct SudokuTask {
  Model model;
  Circuit circuit;  // roots: [invalid, valid] for probabilistic; [valid] fuzzy
  int valid_root = 0;
};
SudokuTask build_sudoku_task(Semantics semantics, TNorm tnorm, int hidden = 0);

struct AlarmTask {
  Model model;
  Circuit circuit;  // single root: P(burglary or earthquake)
};
AlarmTask build_alarm_task(int hidden = 0);

TaskMetrics run_task(const TaskSpec& spec);

}  // namespace deeplog
