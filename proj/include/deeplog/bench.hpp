#pragma once

#include "deeplog/circuit.hpp"

namespace deeplog {

struct BenchConfig {
  std::vector<int> batch_sizes{1, 32, 128, 256};
  int repetitions = 10;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string evaluator;  // naive-recursive | layered
  int batch = 0;
  double median_us = 0.0;  // per-query wall time
  double q1_us = 0.0;
  double q3_us = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  /// median naive time / median layered time at the given batch size
  double speedup_at(int batch) const;
  std::string csv() const;
};

/// Random payload batch shaped for the circuit's perceptual slots.
Batch random_batch(const Model& m, const Circuit& c, int rows, std::uint64_t seed);

/// Times the naive recursive evaluator against the layered batched engine on
/// the same circuit. Compilation is excluded; per-query time is
/// wall / (batch x repetitions per measurement); medians over >= 10 runs.
BenchReport bench(const Model& m, const Circuit& c, const ParameterStore& params,
                  const BenchConfig& config);

/// Worker cap from DEEPLOG_THREADS (defaults to the hardware concurrency).
int worker_count();

/// Runs fn(0..n-1) across workers; outputs must go to preassigned slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace deeplog
