#include <cmath>

#include "deeplog/compiler.hpp"
#include "deeplog/learning.hpp"
#include "deeplog/tasks.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

using namespace deeplog;
using deeplog::testing::alarm_model;

namespace {

// objective fixtures for the training-loop contract tests
struct ConstantObjective final : Objective {
  double loss(const std::vector<int>&, ParameterStore&, bool) override { return 1.0; }
  Eigen::MatrixXd predict(const std::vector<int>& rows, const ParameterStore&) override {
    return Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), 1);
  }
};

Dataset tiny_dataset(int rows) {
  Dataset d;
  d.rows = rows;
  d.split.assign(rows, 0);
  for (int r = 0; r < rows; ++r) d.real_targets.push_back(r % 2);
  return d;
}

}  // namespace

TEST_CASE("BCE at the alarm fixture parameters is -ln(0.703)") {
  Model m = alarm_model();
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));

  Dataset data;
  data.rows = 1;
  data.slots.resize(2);
  data.slots[0].constants = std::vector<ConstId>{m.constant_index.at("t1")};
  data.slots[1].constants = std::vector<ConstId>{m.constant_index.at("t2")};
  data.real_targets = {1.0};
  data.split = {0};

  ArchitectureObjective obj(m, c, data, Semantics::Probabilistic,
                            TrainConfig::LossKind::BinaryCrossEntropy);
  ParameterStore params(m, 1);
  double loss = obj.loss({0}, params, false);
  CHECK(loss == doctest::Approx(-std::log(0.703)).epsilon(1e-9));

  // when the target equals the output, BCE is the output's entropy
  data.real_targets = {0.703};
  double at_target = obj.loss({0}, params, false);
  double entropy = -(0.703 * std::log(0.703) + 0.297 * std::log(0.297));
  CHECK(at_target == doctest::Approx(entropy).epsilon(1e-9));

  // empty dataset rows give a zero objective
  CHECK(obj.loss({}, params, false) == 0.0);
}

TEST_CASE("learning rate zero leaves parameters unchanged") {
  Dataset data = make_alarm_data(60, 3);
  AlarmTask task = build_alarm_task();
  ArchitectureObjective obj(task.model, task.circuit, data, Semantics::Probabilistic,
                            TrainConfig::LossKind::BinaryCrossEntropy);
  ParameterStore params(task.model, 5);
  std::vector<double> before;
  for (std::size_t i = 0; i < params.num_params(); ++i) before.push_back(params.get(i));
  TrainConfig config;
  config.learning_rate = 0.0;
  config.max_epochs = 3;
  train(obj, params, data, config);
  for (std::size_t i = 0; i < params.num_params(); ++i) CHECK(params.get(i) == before[i]);
}

TEST_CASE("patience one with a constant loss stops after two epochs") {
  ConstantObjective obj;
  Dataset data = tiny_dataset(8);
  Model m = alarm_model();
  ParameterStore params(m, 1);  // table model: no parameters
  TrainConfig config;
  config.patience = 1;
  config.max_epochs = 50;
  TrainResult r = train(obj, params, data, config);
  CHECK(r.epochs_run == 2);
}

TEST_CASE("training is bit-deterministic given the seed") {
  auto run_once = [] {
    Dataset data = make_alarm_data(120, 7);
    AlarmTask task = build_alarm_task();
    ArchitectureObjective obj(task.model, task.circuit, data, Semantics::Probabilistic,
                              TrainConfig::LossKind::BinaryCrossEntropy);
    ParameterStore params(task.model, 11);
    TrainConfig config;
    config.seed = 99;
    config.max_epochs = 12;
    train(obj, params, data, config);
    std::vector<double> out;
    for (std::size_t i = 0; i < params.num_params(); ++i) out.push_back(params.get(i));
    return out;
  };
  auto a = run_once();
  auto b = run_once();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("alarm toy task trains to validation BCE below 0.1") {
  // separable payloads, weak or-supervision only; bound frozen from a pilot
  Dataset data = make_alarm_data(600, 1);
  AlarmTask task = build_alarm_task();
  ArchitectureObjective obj(task.model, task.circuit, data, Semantics::Probabilistic,
                            TrainConfig::LossKind::BinaryCrossEntropy);
  ParameterStore params(task.model, 1);
  TrainConfig config;
  config.seed = 1;
  config.max_epochs = 200;
  TrainResult r = train(obj, params, data, config);
  CHECK(r.best_validation < 0.1);
  CHECK(r.epochs_run <= 200);
}

TEST_CASE("metrics: accuracy, chance-level AP, and the enumerated AP fixture") {
  Eigen::MatrixXd perfect(3, 2);
  perfect << 0.9, 0.1, 0.2, 0.8, 0.7, 0.3;
  CHECK(accuracy(perfect, {0, 1, 0}) == doctest::Approx(1.0));
  CHECK(accuracy(perfect, {1, 1, 0}) == doctest::Approx(2.0 / 3.0));

  // constant predictor on a balanced set; ties resolve by row order
  Eigen::VectorXd constant = Eigen::VectorXd::Constant(4, 0.5);
  double ap = average_precision(constant, {1, 0, 1, 0});
  // ranking = rows 0,1,2,3; precisions at the positives: 1/1 and 2/3
  CHECK(ap == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));

  // three-example fixture against exhaustive computation of the same ranking
  Eigen::VectorXd scores(3);
  scores << 0.2, 0.9, 0.4;
  std::vector<int> labels{1, 0, 1};
  // ranking by score: rows 1, 2, 0 -> positives at ranks 2 and 3
  double expected = (1.0 / 2.0 + 2.0 / 3.0) / 2.0;
  CHECK(average_precision(scores, labels) == doctest::Approx(expected));
}

TEST_CASE("finite differences validate the reverse-mode objective gradient") {
  Dataset data = make_alarm_data(40, 21);
  AlarmTask task = build_alarm_task();
  ArchitectureObjective obj(task.model, task.circuit, data, Semantics::Probabilistic,
                            TrainConfig::LossKind::BinaryCrossEntropy);
  ParameterStore params(task.model, 3);
  std::vector<int> rows{0, 1, 2, 3, 4, 5, 6, 7};
  double err = finite_difference_check(obj, params, rows, 16, 5);
  CHECK(err < 1e-4);

  // a model with no learnable parameters passes vacuously
  Model frozen = alarm_model();
  Circuit c = resolve_aggregations(frozen, frozen.formula("alarm_query"));
  Dataset fixed;
  fixed.rows = 1;
  fixed.slots.resize(2);
  fixed.slots[0].constants = std::vector<ConstId>{frozen.constant_index.at("t1")};
  fixed.slots[1].constants = std::vector<ConstId>{frozen.constant_index.at("t2")};
  fixed.real_targets = {1.0};
  fixed.split = {0};
  ArchitectureObjective frozen_obj(frozen, c, fixed, Semantics::Probabilistic,
                                   TrainConfig::LossKind::BinaryCrossEntropy);
  ParameterStore none(frozen, 1);
  CHECK(finite_difference_check(frozen_obj, none, {0}, 4) == 0.0);
}

TEST_CASE("a sign-flipped gradient is caught by the checker") {
  // planted fault: report the negated gradient of a correct objective
  struct Flipped final : Objective {
    ArchitectureObjective inner;
    Flipped(const Model& m, Circuit c, const Dataset& d)
        : inner(m, std::move(c), d, Semantics::Probabilistic,
                TrainConfig::LossKind::BinaryCrossEntropy) {}
    double loss(const std::vector<int>& rows, ParameterStore& params, bool with_grad) override {
      double v = inner.loss(rows, params, with_grad);
      if (with_grad)
        for (std::size_t i = 0; i < params.num_params(); ++i)
          params.set_grad(i, -params.grad(i));
      return v;
    }
    Eigen::MatrixXd predict(const std::vector<int>& rows,
                            const ParameterStore& params) override {
      return inner.predict(rows, params);
    }
  };
  Dataset data = make_alarm_data(40, 2);
  AlarmTask task = build_alarm_task();
  Flipped obj(task.model, task.circuit, data);
  ParameterStore params(task.model, 9);
  double err = finite_difference_check(obj, params, {0, 1, 2, 3}, 16, 7);
  CHECK(err == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("merge and extract preserve root semantics") {
  Model m = alarm_model();
  Circuit c = resolve_aggregations(m, m.formula("alarm_query"));
  Circuit merged = merge_circuits(m, {c, c}, "twice");
  CHECK(merged.roots.size() == 2);
  CHECK(merged.roots[0] == merged.roots[1]);  // shared structure dedups
  Circuit back = extract_root(m, merged, 1);
  ParameterStore params(m, 1);
  Batch batch;
  batch.rows = 1;
  batch.slots.resize(2);
  batch.slots[0].constants = std::vector<ConstId>{m.constant_index.at("t1")};
  batch.slots[1].constants = std::vector<ConstId>{m.constant_index.at("t2")};
  double v = eval_forward(m, back, layerize(m, back), params, batch)(0, 0);
  CHECK(v == doctest::Approx(0.703).epsilon(1e-12));
}
