#include "deeplog/bench.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <chrono>
#include <cstdlib>
#include <sstream>
#include <thread>

namespace deeplog {

int worker_count() {
  if (const char* env = std::getenv("DEEPLOG_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int workers = std::min<int>(worker_count(), static_cast<int>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double BenchReport::speedup_at(int batch) const {
  double naive = 0.0, layered = 0.0;
  for (const auto& r : rows) {
    if (r.batch != batch) continue;
    if (r.evaluator == "naive-recursive") naive = r.median_us;
    if (r.evaluator == "layered") layered = r.median_us;
  }
  if (layered <= 0.0) fail("no layered measurement at the requested batch size");
  return naive / layered;
}

std::string BenchReport::csv() const {
  std::ostringstream os;
  os << "evaluator,batch,median_us_per_query,q1_us,q3_us\n";
  for (const auto& r : rows)
    os << r.evaluator << "," << r.batch << "," << r.median_us << "," << r.q1_us << ","
       << r.q3_us << "\n";
  return os.str();
}

Batch random_batch(const Model& m, const Circuit& c, int rows, std::uint64_t seed) {
  if (rows < 1) fail("repetitions require nonempty batch");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // slot payload widths from the perceptual entries that read them
  std::vector<int> dims(c.slots.size(), 0);
  for (const LeafRef& leaf : c.leaves) {
    const LabelEntry& e = m.labelling.entries.at(leaf.entry);
    if (e.kind != LabelKind::Perceptual) continue;
    int payload_args = 0;
    for (std::size_t i = 0; i < leaf.atom.args.size(); ++i)
      payload_args += static_cast<int>(i) != e.class_arg;
    if (payload_args == 0) continue;
    int per_arg = e.input_dim / payload_args;
    for (std::size_t i = 0; i < leaf.atom.args.size(); ++i) {
      if (static_cast<int>(i) == e.class_arg) continue;
      const ArgRef& a = leaf.atom.args[i];
      if (a.is_slot) dims[a.value] = per_arg;
    }
  }
  Batch batch;
  batch.rows = rows;
  batch.slots.resize(c.slots.size());
  for (std::size_t s = 0; s < c.slots.size(); ++s) {
    if (dims[s] == 0) continue;
    Eigen::MatrixXd payload(rows, dims[s]);
    for (Eigen::Index i = 0; i < payload.size(); ++i) payload.data()[i] = gauss(rng);
    batch.slots[s].payloads = std::move(payload);
  }
  return batch;
}

namespace {

struct Quartiles {
  double q1, median, q3;
};

Quartiles quartiles(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  auto at = [&](double q) {
    double pos = q * static_cast<double>(xs.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, xs.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
  };
  return {at(0.25), at(0.5), at(0.75)};
}

}  // namespace

BenchReport bench(const Model& m, const Circuit& c, const ParameterStore& params,
                  const BenchConfig& config) {
  if (config.repetitions < 10) fail("benchmark repetitions must be >= 10");
  Layerization plan = layerize(m, c);
  BenchReport report;
  for (int batch_size : config.batch_sizes) {
    Batch batch = random_batch(m, c, batch_size, config.seed);
    // warm both paths once
    volatile double sink = eval_forward(m, c, plan, params, batch).sum();
    sink = sink + eval_naive(m, c, params, batch).sum();
    (void)sink;

    std::vector<double> layered_us, naive_us;
    for (int rep = 0; rep < config.repetitions; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      Eigen::MatrixXd out = eval_forward(m, c, plan, params, batch);
      double us =
          std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
              .count();
      layered_us.push_back(us / batch_size);
      if (out.hasNaN()) fail("benchmark produced non-finite values");
    }
    for (int rep = 0; rep < config.repetitions; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      Eigen::MatrixXd out = eval_naive(m, c, params, batch);
      double us =
          std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
              .count();
      naive_us.push_back(us / batch_size);
      if (out.hasNaN()) fail("benchmark produced non-finite values");
    }
    Quartiles lq = quartiles(layered_us);
    Quartiles nq = quartiles(naive_us);
    report.rows.push_back({"naive-recursive", batch_size, nq.median, nq.q1, nq.q3});
    report.rows.push_back({"layered", batch_size, lq.median, lq.q1, lq.q3});
  }
  return report;
}

}  // namespace deeplog
