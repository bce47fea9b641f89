#include "deeplog/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace deeplog {

std::vector<int> Dataset::rows_of_split(int which) const {
  std::vector<int> out;
  for (int r = 0; r < rows; ++r)
    if (split[r] == which) out.push_back(r);
  return out;
}

Batch Dataset::gather(const std::vector<int>& row_ids) const {
  Batch b;
  b.rows = static_cast<std::int32_t>(row_ids.size());
  b.slots.resize(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].payloads) {
      Eigen::MatrixXd rows_m(b.rows, slots[s].payloads->cols());
      for (std::size_t i = 0; i < row_ids.size(); ++i)
        rows_m.row(static_cast<Eigen::Index>(i)) = slots[s].payloads->row(row_ids[i]);
      b.slots[s].payloads = std::move(rows_m);
    } else if (slots[s].constants) {
      std::vector<ConstId> cs;
      cs.reserve(row_ids.size());
      for (int r : row_ids) cs.push_back(slots[s].constants->at(r));
      b.slots[s].constants = std::move(cs);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Circuit replay / merging

namespace {

std::int32_t replay_node(CircuitBuilder& b, const Circuit& c, std::int32_t n,
                         std::vector<std::int32_t>& map) {
  if (map[n] >= 0) return map[n];
  const CircuitNode& nd = c.nodes[n];
  std::int32_t out = -1;
  switch (nd.kind) {
    case CircuitNode::Kind::Leaf: {
      const LeafRef& lr = c.leaves[nd.a];
      out = b.leaf(lr.entry, lr.atom, lr.component);
      break;
    }
    case CircuitNode::Kind::Const: out = b.constant(nd.sid, c.consts[nd.a]); break;
    case CircuitNode::Kind::Transform:
      out = b.transform(nd.sid, nd.b, replay_node(b, c, nd.a, map));
      break;
    case CircuitNode::Kind::Op: {
      auto [ks, cnt] = c.node_kids(n);
      std::vector<std::int32_t> kids;
      for (std::int32_t i = 0; i < cnt; ++i) kids.push_back(replay_node(b, c, ks[i], map));
      out = b.op(nd.sid, nd.op, std::move(kids));
      break;
    }
  }
  map[n] = out;
  return out;
}

}  // namespace

Circuit merge_circuits(const Model& m, const std::vector<Circuit>& circuits,
                       const std::string& name) {
  if (circuits.empty()) fail("merge_circuits needs at least one circuit");
  CircuitBuilder b(m);
  std::vector<std::string> slots = circuits[0].slots;
  for (const Circuit& c : circuits) {
    if (c.slots != slots) fail("merge_circuits expects identical slot tables");
    if (c.roots.size() != 1) fail("merge_circuits expects single-rooted circuits");
    std::vector<std::int32_t> map(c.size(), -1);
    b.add_root(replay_node(b, c, c.roots[0], map));
  }
  return b.finish(name, slots);
}

Circuit extract_root(const Model& m, const Circuit& c, std::size_t root_index) {
  CircuitBuilder b(m);
  std::vector<std::int32_t> map(c.size(), -1);
  b.add_root(replay_node(b, c, c.roots.at(root_index), map));
  return b.finish(c.name + "#" + std::to_string(root_index), c.slots);
}

// ---------------------------------------------------------------------------
// Architecture objective

ArchitectureObjective::ArchitectureObjective(const Model& m, Circuit answer_circuit,
                                             const Dataset& data, Semantics semantics,
                                             TrainConfig::LossKind loss_kind,
                                             ExpectedFuzzyConfig sampling)
    : model_(m),
      circuit_(std::move(answer_circuit)),
      plan_(layerize(m, circuit_)),
      data_(data),
      semantics_(semantics),
      loss_kind_(loss_kind),
      sampling_(sampling) {}

namespace {

constexpr double kEps = 1e-12;

// loss and upstream derivative for a matrix of predictions
double loss_and_upstream(TrainConfig::LossKind kind, const Eigen::MatrixXd& out,
                         const std::vector<int>& row_ids, const Dataset& data,
                         Eigen::MatrixXd* upstream) {
  const std::size_t n = row_ids.size();
  double total = 0.0;
  if (upstream) *upstream = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index r = static_cast<Eigen::Index>(i);
    switch (kind) {
      case TrainConfig::LossKind::NegativeLogLikelihood: {
        int y = data.class_targets.at(row_ids[i]);
        double p = std::max(out(r, y), kEps);
        total += -std::log(p);
        if (upstream) (*upstream)(r, y) = -1.0 / (p * static_cast<double>(n));
        break;
      }
      case TrainConfig::LossKind::BinaryCrossEntropy: {
        double y = data.real_targets.at(row_ids[i]);
        double p = std::min(std::max(out(r, 0), kEps), 1.0 - kEps);
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        if (upstream)
          (*upstream)(r, 0) = ((p - y) / (p * (1.0 - p))) / static_cast<double>(n);
        break;
      }
      case TrainConfig::LossKind::MeanSquaredError: {
        if (out.cols() == 1) {
          double y = data.real_targets.at(row_ids[i]);
          double d = out(r, 0) - y;
          total += d * d;
          if (upstream) (*upstream)(r, 0) = 2.0 * d / static_cast<double>(n);
        } else {
          int y = data.class_targets.at(row_ids[i]);
          for (Eigen::Index a = 0; a < out.cols(); ++a) {
            double d = out(r, a) - (a == y ? 1.0 : 0.0);
            total += d * d;
            if (upstream) (*upstream)(r, a) = 2.0 * d / static_cast<double>(n);
          }
        }
        break;
      }
    }
  }
  return total / static_cast<double>(n);
}

LeafNoise make_noise(const Layerization& plan, std::int32_t rows, double sigma,
                     std::uint64_t seed) {
  LeafNoise noise;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t g = 0; g < plan.leaf_groups.size(); ++g) {
    Eigen::MatrixXd eps(rows, plan.leaf_groups[g].classes);
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = gauss(rng);
    noise.logit_noise[static_cast<std::int32_t>(g)] = sigma * eps;
  }
  return noise;
}

}  // namespace

double ArchitectureObjective::loss(const std::vector<int>& row_ids, ParameterStore& params,
                                   bool with_grad) {
  if (row_ids.empty()) return 0.0;
  Batch batch = data_.gather(row_ids);
  if (semantics_ != Semantics::ProbabilisticFuzzy) {
    EvalWorkspace ws;
    Eigen::MatrixXd out = eval_forward(model_, circuit_, plan_, params, batch, &ws);
    Eigen::MatrixXd upstream;
    double value =
        loss_and_upstream(loss_kind_, out, row_ids, data_, with_grad ? &upstream : nullptr);
    if (with_grad) eval_gradient(model_, circuit_, plan_, params, batch, upstream, ws);
    return value;
  }

  // sampled expectation: mean over pathwise samples of the forward pass;
  // noise is a pure function of the rows (common random numbers), so repeated
  // evaluations at perturbed parameters stay comparable
  const int samples = std::max(1, sampling_.samples);
  std::uint64_t round = 0xcbf29ce484222325ULL;
  for (int r : row_ids) round = (round ^ static_cast<std::uint64_t>(r)) * 0x100000001b3ULL;
  Eigen::MatrixXd mean;
  for (int s = 0; s < samples; ++s) {
    LeafNoise noise = make_noise(plan_, batch.rows, sampling_.sigma,
                                 sampling_.seed ^ (round * 1315423911ULL + s));
    Eigen::MatrixXd out = eval_forward(model_, circuit_, plan_, params, batch, nullptr, &noise);
    if (mean.size() == 0) mean = out;
    else mean += out;
  }
  mean /= static_cast<double>(samples);
  Eigen::MatrixXd upstream;
  double value =
      loss_and_upstream(loss_kind_, mean, row_ids, data_, with_grad ? &upstream : nullptr);
  if (with_grad) {
    upstream /= static_cast<double>(samples);
    for (int s = 0; s < samples; ++s) {
      LeafNoise noise = make_noise(plan_, batch.rows, sampling_.sigma,
                                   sampling_.seed ^ (round * 1315423911ULL + s));
      EvalWorkspace ws;
      eval_forward(model_, circuit_, plan_, params, batch, &ws, &noise);
      eval_gradient(model_, circuit_, plan_, params, batch, upstream, ws, &noise);
    }
  }
  return value;
}

Eigen::MatrixXd ArchitectureObjective::predict(const std::vector<int>& row_ids,
                                               const ParameterStore& params) {
  Batch batch = data_.gather(row_ids);
  if (semantics_ != Semantics::ProbabilisticFuzzy)
    return eval_forward(model_, circuit_, plan_, params, batch);
  ExpectedFuzzyConfig cfg = sampling_;
  cfg.dist = LeafDist::LogitNormal;
  return eval_expected_fuzzy(model_, circuit_, plan_, params, batch, cfg);
}

// ---------------------------------------------------------------------------
// Loss-mode objective

LossModeObjective::LossModeObjective(const Model& m, std::int32_t head_entry,
                                     Circuit answer_circuit, const Dataset& data,
                                     Semantics semantics)
    : model_(m), head_entry_(head_entry), data_(data), semantics_(semantics) {
  // agreement circuit: sum_s head_s (x) rules_s over the rules' structure
  const LabelEntry& e = m.labelling.entries.at(head_entry);
  CircuitBuilder b(m);
  std::vector<std::int32_t> map(answer_circuit.size(), -1);
  StructId sid = answer_circuit.root_sid();
  if (e.sid != sid) fail("task head labelling lives in a different structure than the rules");
  const AlgebraicStructure& st = m.structure(sid);
  OpCode mul = st.kind == StructureKind::Probability ? OpCode::Mul : OpCode::And;
  OpCode add = st.kind == StructureKind::Probability ? OpCode::Add : OpCode::Or;

  // the head atom: every payload slot, plus the class argument
  LeafAtom head;
  head.pred = e.pred;
  const auto& sig = m.predicates.at(e.pred);
  for (std::size_t i = 0; i < sig.arity(); ++i) {
    if (static_cast<int>(i) == e.class_arg) {
      head.args.push_back(ArgRef::constant(-1));  // filled per class below
    } else {
      head.args.push_back(ArgRef::slot(static_cast<std::int32_t>(head.args.size())));
    }
  }
  std::vector<std::int32_t> terms;
  for (std::size_t s = 0; s < answer_circuit.roots.size(); ++s) {
    LeafAtom atom = head;
    if (e.class_arg >= 0) {
      DomainId dom = sig.domains.at(e.class_arg);
      atom.args[e.class_arg] = ArgRef::constant(m.domains.at(dom).members.at(s));
    }
    std::int32_t head_leaf = b.leaf(head_entry, atom, static_cast<std::int32_t>(s));
    std::int32_t rules = replay_node(b, answer_circuit, answer_circuit.roots[s], map);
    terms.push_back(b.op(sid, mul, {head_leaf, rules}));
  }
  std::int32_t agree = terms[0];
  if (terms.size() > 1) {
    if (st.kind == StructureKind::Probability) {
      agree = b.op(sid, add, terms);
    } else {
      for (std::size_t i = 1; i < terms.size(); ++i) agree = b.op(sid, add, {agree, terms[i]});
    }
  }
  b.add_root(agree);
  agreement_ = b.finish(answer_circuit.name + "+head", answer_circuit.slots);
  plan_ = layerize(m, agreement_);
}

Eigen::MatrixXd LossModeObjective::head_scores(const std::vector<int>& row_ids,
                                               const ParameterStore& params,
                                               EvalWorkspace*) const {
  // the head group appears inside the agreement plan; evaluate it directly
  Batch batch = data_.gather(row_ids);
  EvalWorkspace ws;
  eval_forward(model_, agreement_, plan_, params, batch, &ws);
  for (std::size_t g = 0; g < plan_.leaf_groups.size(); ++g)
    if (plan_.leaf_groups[g].entry == head_entry_) return ws.groups[g].scores;
  fail("task head group missing from the agreement circuit");
}

double LossModeObjective::loss(const std::vector<int>& row_ids, ParameterStore& params,
                               bool with_grad) {
  if (row_ids.empty()) return 0.0;
  Batch batch = data_.gather(row_ids);
  const std::size_t n = row_ids.size();
  EvalWorkspace ws;
  Eigen::MatrixXd agree = eval_forward(model_, agreement_, plan_, params, batch, &ws);

  std::int32_t head_group = -1;
  for (std::size_t g = 0; g < plan_.leaf_groups.size(); ++g)
    if (plan_.leaf_groups[g].entry == head_entry_) head_group = static_cast<std::int32_t>(g);
  if (head_group < 0) fail("task head group missing from the agreement circuit");
  const Eigen::MatrixXd& head = ws.groups[head_group].scores;

  // supervised negative log-likelihood on the head
  double supervised = 0.0;
  Eigen::MatrixXd dhead = Eigen::MatrixXd::Zero(head.rows(), head.cols());
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Index r = static_cast<Eigen::Index>(i);
    int y = data_.class_targets.empty()
                ? (data_.real_targets.at(row_ids[i]) > 0.5 ? 1 : 0)
                : data_.class_targets.at(row_ids[i]);
    double p = std::max(head(r, y), kEps);
    supervised += -std::log(p);
    dhead(r, y) = -1.0 / (p * static_cast<double>(n));
  }
  supervised /= static_cast<double>(n);

  // unweighted semantic penalty: 1 - agreement
  double penalty = (1.0 - agree.col(0).array()).sum() / static_cast<double>(n);

  if (with_grad) {
    Eigen::MatrixXd upstream =
        Eigen::MatrixXd::Constant(agree.rows(), 1, -1.0 / static_cast<double>(n));
    eval_gradient(model_, agreement_, plan_, params, batch, upstream, ws);
    // supervised head gradient through its softmax
    const LeafGroup& lg = plan_.leaf_groups[head_group];
    Eigen::VectorXd dot = (dhead.array() * head.array()).rowwise().sum();
    Eigen::MatrixXd dlogits = head.array() * (dhead.array().colwise() - dot.array());
    ParamBlock* b = params.block_for_entry(head_entry_);
    if (b && b->perceptual) {
      const GroupCache& cache = ws.groups[head_group];
      PerceptualParams& pp = *b->perceptual;
      if (pp.w1.size() > 0) {
        pp.gw2 += dlogits.transpose() * cache.hidden;
        pp.gb2 += dlogits.colwise().sum().transpose();
        Eigen::MatrixXd dh = dlogits * pp.w2;
        Eigen::MatrixXd dz = dh.array() * (1.0 - cache.hidden.array().square());
        pp.gw1 += dz.transpose() * cache.inputs;
        pp.gb1 += dz.colwise().sum().transpose();
      } else {
        pp.gw2 += dlogits.transpose() * cache.inputs;
        pp.gb2 += dlogits.colwise().sum().transpose();
      }
    } else if (b && b->categorical) {
      const GroupCache& cache = ws.groups[head_group];
      for (Eigen::Index r = 0; r < dlogits.rows(); ++r)
        b->categorical->glogits.row(cache.row_instance[r]) += dlogits.row(r);
    }
    (void)lg;
  }
  return supervised + penalty;
}

Eigen::MatrixXd LossModeObjective::predict(const std::vector<int>& row_ids,
                                           const ParameterStore& params) {
  return head_scores(row_ids, params, nullptr);
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(Objective& objective, ParameterStore& params, const Dataset& data,
                  const TrainConfig& config) {
  if (config.learning_rate < 0) fail("learning rate must be nonnegative");
  if (config.patience < 1) fail("patience must be >= 1");
  std::vector<int> train_rows = data.rows_of_split(0);
  std::vector<int> val_rows = data.rows_of_split(1);

  const std::size_t np = params.num_params();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(np));
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long long step = 0;

  TrainResult result;
  std::vector<double> best_values(np);
  for (std::size_t i = 0; i < np; ++i) best_values[i] = params.get(i);
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch));
    std::vector<int> order = train_rows;
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
      std::vector<int> rows(order.begin() + at,
                            order.begin() + std::min(order.size(),
                                                     at + static_cast<std::size_t>(
                                                              config.batch_size)));
      params.zero_grad();
      double batch_loss = objective.loss(rows, params, true);
      if (!std::isfinite(batch_loss))
        fail("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += batch_loss;
      ++batches;
      ++step;
      double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < np; ++i) {
        double g = params.grad(i);
        double theta = params.get(i);
        if (config.optimizer == TrainConfig::Optimizer::AdamW) {
          m(static_cast<Eigen::Index>(i)) = beta1 * m(static_cast<Eigen::Index>(i)) +
                                            (1.0 - beta1) * g;
          v(static_cast<Eigen::Index>(i)) = beta2 * v(static_cast<Eigen::Index>(i)) +
                                            (1.0 - beta2) * g * g;
          double mhat = m(static_cast<Eigen::Index>(i)) / bc1;
          double vhat = v(static_cast<Eigen::Index>(i)) / bc2;
          theta -= config.learning_rate *
                   (mhat / (std::sqrt(vhat) + adam_eps) + config.weight_decay * theta);
        } else {
          theta -= config.learning_rate * g;
        }
        params.set(i, theta);
      }
    }
    epoch_loss /= std::max<std::size_t>(1, batches);

    double val_loss = epoch_loss;
    if (!val_rows.empty()) val_loss = objective.loss(val_rows, params, false);
    if (!std::isfinite(val_loss))
      fail("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
    result.history.push_back({static_cast<double>(epoch), epoch_loss, val_loss});
    result.epochs_run = epoch + 1;

    if (val_loss < best_val - 1e-12) {
      best_val = val_loss;
      result.best_epoch = epoch;
      for (std::size_t i = 0; i < np; ++i) best_values[i] = params.get(i);
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= config.patience) break;
    }
  }
  for (std::size_t i = 0; i < np; ++i) params.set(i, best_values[i]);
  result.best_validation = best_val;
  return result;
}

// ---------------------------------------------------------------------------
// Metrics and checks

double accuracy(const Eigen::MatrixXd& scores, const std::vector<int>& targets) {
  if (targets.empty()) fail("accuracy over an empty test split");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Eigen::Index best = 0;
    scores.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    hits += static_cast<int>(best) == targets[i];
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double average_precision(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
  if (labels.empty()) fail("average precision over an empty test split");
  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;  // documented tie convention: earlier rows rank first
  });
  double positives = 0.0, ap = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] != 1) continue;
    positives += 1.0;
    ap += positives / static_cast<double>(k + 1);
  }
  if (positives == 0.0) fail("average precision needs at least one positive row");
  return ap / positives;
}

double finite_difference_check(Objective& objective, ParameterStore& params,
                               const std::vector<int>& row_ids, int probes,
                               std::uint64_t seed) {
  if (probes < 1) fail("finite_difference_check needs probes >= 1");
  if (params.num_params() == 0) return 0.0;  // vacuous pass
  params.zero_grad();
  objective.loss(row_ids, params, true);
  std::vector<double> grads(params.num_params());
  for (std::size_t i = 0; i < params.num_params(); ++i) grads[i] = params.grad(i);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, params.num_params() - 1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    std::size_t i = pick(rng);
    double v0 = params.get(i);
    params.set(i, v0 + h);
    double up = objective.loss(row_ids, params, false);
    params.set(i, v0 - h);
    double dn = objective.loss(row_ids, params, false);
    params.set(i, v0);
    double fd = (up - dn) / (2 * h);
    double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-8});
    worst = std::max(worst, std::abs(grads[i] - fd) / denom);
  }
  return worst;
}

}  // namespace deeplog
