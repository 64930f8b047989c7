#include "wristloc/training.hpp"

#include "wristloc/errors.hpp"
#include "wristloc/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>

namespace wristloc::train {

double huber_loss(const Vec3& pred, const Vec3& target, double delta) {
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double r = std::abs(pred(i) - target(i));
    sum += r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  return sum / 3.0;
}

Vec3 huber_grad(const Vec3& pred, const Vec3& target, double delta) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    const double r = pred(i) - target(i);
    g(i) = std::clamp(r, -delta, delta) / 3.0;
  }
  return g;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::InvalidConfig, "epochs must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidConfig, "learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
  if (!(huber_delta > 0.0)) fail(ErrorCode::InvalidConfig, "huber_delta must be > 0");
  if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (plateau_patience < 1) fail(ErrorCode::InvalidConfig, "plateau_patience must be >= 1");
  if (!(max_grad_norm >= 0.0)) fail(ErrorCode::InvalidConfig, "max_grad_norm must be >= 0");
  if (!(weight_decay >= 0.0)) fail(ErrorCode::InvalidConfig, "weight_decay must be >= 0");
  if (plateau_min_delta < 0.0 || plateau_relative_delta < 0.0) {
    fail(ErrorCode::InvalidConfig, "plateau deltas must be >= 0");
  }
}

std::vector<double> TrainHistory::validation_losses() const {
  std::vector<double> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) out.push_back(e.validation_loss);
  return out;
}

double TrainHistory::final_validation_loss() const {
  if (epochs.empty()) fail(ErrorCode::EmptyInput, "history is empty");
  return epochs.back().validation_loss;
}

void TrainHistory::write_csv(std::ostream& out, bool include_seconds) const {
  out << (include_seconds ? "epoch,train_loss,val_loss,seconds\n" : "epoch,train_loss,val_loss\n");
  char buf[160];
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    if (include_seconds) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.6f\n", i + 1, e.train_loss, e.validation_loss, e.seconds);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i + 1, e.train_loss, e.validation_loss);
    }
    out << buf;
  }
}

bool detect_plateau(const std::vector<double>& losses, int patience, double min_delta) {
  if (patience < 1) fail(ErrorCode::InvalidArgument, "patience must be >= 1");
  const auto n = losses.size();
  const auto p = static_cast<std::size_t>(patience);
  if (n <= p) return false;
  const double before = *std::min_element(losses.begin(), losses.end() - p);
  const double recent = *std::min_element(losses.end() - p, losses.end());
  return before - recent <= min_delta;
}

ExampleSet ExampleSet::subset(const std::vector<Eigen::Index>& columns) const {
  ExampleSet out;
  out.features.resize(features.rows(), static_cast<Eigen::Index>(columns.size()));
  out.targets.resize(3, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out.features.col(i) = features.col(columns[i]);
    out.targets.col(i) = targets.col(columns[i]);
    if (!ids.empty()) out.ids.push_back(ids[columns[i]]);
  }
  return out;
}

const Vector& FeatureBank::get(const data::FrameRecord& record) {
  const std::string key = record.image_ref.string() + '\n' + record.prompt;
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    const Raster image = read_png(record.image_ref);
    it = cache_.emplace(key, backbone_.features(image, record.prompt)).first;
  }
  return it->second;
}

void FeatureBank::prefetch(const std::vector<data::FrameRecord>& records, int jobs) {
  std::vector<const data::FrameRecord*> todo;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& r : records) {
    const std::string key = r.image_ref.string() + '\n' + r.prompt;
    if (!cache_.contains(key) && seen.emplace(key, todo.size()).second) todo.push_back(&r);
  }
  std::vector<Vector> out(todo.size());
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), std::max<std::size_t>(todo.size(), 1));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < todo.size(); i += workers) {
        out[i] = backbone_.features(read_png(todo[i]->image_ref), todo[i]->prompt);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < todo.size(); ++i) {
    cache_.emplace(todo[i]->image_ref.string() + '\n' + todo[i]->prompt, std::move(out[i]));
  }
}

ExampleSet FeatureBank::examples(const std::vector<data::FrameRecord>& records) {
  ExampleSet out;
  out.features.resize(backbone_.feature_dim(), static_cast<Eigen::Index>(records.size()));
  out.targets.resize(3, static_cast<Eigen::Index>(records.size()));
  out.ids.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.features.col(i) = get(records[i]);
    out.targets.col(i) = records[i].target;
    out.ids.push_back(records[i].image_rel);
  }
  return out;
}

model::Normalization fit_normalization(const ExampleSet& train) {
  if (train.size() == 0) fail(ErrorCode::EmptyInput, "cannot fit normalization on an empty set");
  auto stats = [](const Matrix& m, double floor, Vector& mean, Vector& sd) {
    mean = m.rowwise().mean();
    sd = ((m.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
    // Rarely active units would otherwise get huge gains on unseen data.
    sd = sd.cwiseMax(std::max(floor, 0.05 * sd.mean()));
  };
  model::Normalization n;
  Vector sd;
  stats(train.features, 1e-8, n.input_mean, sd);
  n.input_inv_std = sd.cwiseInverse();
  stats(train.targets, 1.0, n.output_offset, n.output_scale);
  return n;
}

namespace {

void check_examples(const ExampleSet& set, Eigen::Index dim, const char* what) {
  if (set.size() == 0) fail(ErrorCode::EmptyInput, std::string(what) + " set is empty");
  if (set.features.rows() != dim || set.targets.rows() != 3 || set.targets.cols() != set.size()) {
    fail(ErrorCode::DimensionMismatch, std::string(what) + " features do not match the model");
  }
}

// Loss over columns given the de-normalized predictions; fills the gradient
// with respect to the predictions (already divided by the batch size).
double loss_and_pred_grad(const Matrix& pred, const Matrix& targets, double delta, Matrix* g_pred) {
  const auto n = pred.cols();
  double total = 0.0;
  if (g_pred) g_pred->resize(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 p = pred.col(i);
    const Vec3 t = targets.col(i);
    total += huber_loss(p, t, delta);
    if (g_pred) g_pred->col(i) = huber_grad(p, t, delta) / static_cast<double>(n);
  }
  return total / static_cast<double>(n);
}

// base_pre holds the frozen part W f + b of the fusion pre-activation.
double position_loss(const model::PositionModel& m, const Matrix& features, const Matrix& base_pre,
                     const Matrix& targets, double delta, PositionGradients* grad) {
  const auto& ad = m.adapter();
  const auto& head = m.head();
  const auto& norm = head.norm;
  const double s = ad.scale();

  const Matrix af = ad.A * features;
  const Matrix z = base_pre + s * (ad.B * af);
  const Matrix u = z.cwiseMax(0.0);
  const Matrix x = (u.colwise() - norm.input_mean).array().colwise() * norm.input_inv_std.array();
  const Matrix h1 = (head.W1 * x).colwise() + head.b1;
  const Matrix h = h1.cwiseMax(0.0);
  const Matrix o = (head.W2 * h).colwise() + head.b2;
  const Matrix pred = (o.array().colwise() * norm.output_scale.array()).colwise() + norm.output_offset.array();

  Matrix g_pred;
  const double loss = loss_and_pred_grad(pred, targets, delta, grad ? &g_pred : nullptr);
  if (!grad) return loss;

  const Matrix g_o = g_pred.array().colwise() * norm.output_scale.array();
  grad->W2 = g_o * h.transpose();
  grad->b2 = g_o.rowwise().sum();
  const Matrix g_h = (head.W2.transpose() * g_o).cwiseProduct((h1.array() > 0.0).cast<double>().matrix());
  grad->W1 = g_h * x.transpose();
  grad->b1 = g_h.rowwise().sum();
  const Matrix g_x = head.W1.transpose() * g_h;
  const Matrix g_z = (g_x.array().colwise() * norm.input_inv_std.array()) * (z.array() > 0.0).cast<double>();
  grad->B = s * (g_z * af.transpose());
  grad->A = s * ((ad.B.transpose() * g_z) * features.transpose());
  return loss;
}

Matrix base_preactivation(const model::PositionModel& m, const Matrix& features) {
  return (m.fusion_weight() * features).colwise() + m.fusion_bias();
}

double probe_loss(const model::LinearProbe& m, const Matrix& features, const Matrix& targets, double delta,
                  ProbeGradients* grad) {
  const auto& norm = m.norm();
  const Matrix x = (features.colwise() - norm.input_mean).array().colwise() * norm.input_inv_std.array();
  const Matrix o = (m.weight() * x).colwise() + m.bias();
  const Matrix pred = (o.array().colwise() * norm.output_scale.array()).colwise() + norm.output_offset.array();
  Matrix g_pred;
  const double loss = loss_and_pred_grad(pred, targets, delta, grad ? &g_pred : nullptr);
  if (!grad) return loss;
  const Matrix g_o = g_pred.array().colwise() * norm.output_scale.array();
  grad->W = g_o * x.transpose();
  grad->b = g_o.rowwise().sum();
  return loss;
}

// Momentum SGD: v = mu v + g, theta -= lr v.
template <typename T>
void sgd_step(T& param, T& velocity, const T& g, const TrainConfig& c, double clip) {
  velocity = c.momentum * velocity + clip * g + c.weight_decay * param;
  param -= c.learning_rate * velocity;
}

// Factor that brings the global gradient norm down to max_grad_norm.
template <typename... Ts>
double clip_factor(const TrainConfig& c, const Ts&... grads) {
  if (c.max_grad_norm <= 0.0) return 1.0;
  const double norm = std::sqrt((grads.squaredNorm() + ...));
  return norm > c.max_grad_norm ? c.max_grad_norm / norm : 1.0;
}

void check_finite(double loss, int epoch, Eigen::Index batch_start) {
  if (!std::isfinite(loss)) {
    fail(ErrorCode::NonFiniteLoss, "loss became " + std::to_string(loss) + " at epoch " + std::to_string(epoch) +
                                       ", batch starting at shuffled index " + std::to_string(batch_start) +
                                       "; try a smaller learning_rate");
  }
}

// Shared epoch loop. step(columns) trains on one batch and returns its loss;
// evaluate() returns the mean validation loss.
template <typename Step, typename Evaluate>
TrainHistory run_loop(Eigen::Index n, const TrainConfig& config, Step step, Evaluate evaluate) {
  TrainHistory history;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  double best = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<Eigen::Index>(order));

    double weighted = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index end = std::min<Eigen::Index>(n, start + config.batch_size);
      const std::vector<Eigen::Index> cols(order.begin() + start, order.begin() + end);
      const double loss = step(cols);
      check_finite(loss, epoch, start);
      weighted += loss * static_cast<double>(end - start);
    }
    EpochStats stats;
    stats.train_loss = weighted / static_cast<double>(n);
    stats.validation_loss = evaluate();
    check_finite(stats.validation_loss, epoch, n);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(stats);

    best = std::min(best, stats.validation_loss);
    const double min_delta = std::max(config.plateau_min_delta, config.plateau_relative_delta * best);
    if (epoch < config.epochs &&
        detect_plateau(history.validation_losses(), config.plateau_patience, min_delta)) {
      history.stopped_early = true;
      break;
    }
  }
  return history;
}

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(i) = m.col(cols[i]);
  return out;
}

}  // namespace

double batch_loss(const model::PositionModel& m, const ExampleSet& batch, double delta, PositionGradients* grad) {
  check_examples(batch, m.backbone().feature_dim(), "batch");
  return position_loss(m, batch.features, base_preactivation(m, batch.features), batch.targets, delta, grad);
}

double batch_loss(const model::LinearProbe& m, const ExampleSet& batch, double delta, ProbeGradients* grad) {
  check_examples(batch, m.backbone().feature_dim(), "batch");
  return probe_loss(m, batch.features, batch.targets, delta, grad);
}

TrainHistory train(model::PositionModel& m, const ExampleSet& train_set, const ExampleSet& validation,
                   const TrainConfig& config) {
  config.validate();
  const auto d = m.backbone().feature_dim();
  check_examples(train_set, d, "training");
  check_examples(validation, d, "validation");

  // The fusion projection is frozen, so its output is computed once.
  const Matrix train_pre = base_preactivation(m, train_set.features);
  const Matrix val_pre = base_preactivation(m, validation.features);
  m.head().norm = fit_normalization(ExampleSet{train_pre.cwiseMax(0.0), train_set.targets, {}});

  auto& ad = m.adapter();
  auto& head = m.head();
  PositionGradients vel{Matrix::Zero(ad.A.rows(), ad.A.cols()), Matrix::Zero(ad.B.rows(), ad.B.cols()),
                        Matrix::Zero(head.W1.rows(), head.W1.cols()), Vector::Zero(head.b1.size()),
                        Matrix::Zero(head.W2.rows(), head.W2.cols()), Vector::Zero(head.b2.size())};
  auto step = [&](const std::vector<Eigen::Index>& cols) {
    PositionGradients g;
    const double loss = position_loss(m, gather(train_set.features, cols), gather(train_pre, cols),
                                      gather(train_set.targets, cols), config.huber_delta, &g);
    const double clip = clip_factor(config, g.A, g.B, g.W1, g.b1, g.W2, g.b2);
    sgd_step(ad.A, vel.A, g.A, config, clip);
    sgd_step(ad.B, vel.B, g.B, config, clip);
    sgd_step(head.W1, vel.W1, g.W1, config, clip);
    sgd_step(head.b1, vel.b1, g.b1, config, clip);
    sgd_step(head.W2, vel.W2, g.W2, config, clip);
    sgd_step(head.b2, vel.b2, g.b2, config, clip);
    return loss;
  };
  auto evaluate = [&] {
    return position_loss(m, validation.features, val_pre, validation.targets, config.huber_delta, nullptr);
  };
  return run_loop(train_set.size(), config, step, evaluate);
}

TrainHistory train_baseline(model::LinearProbe& m, const ExampleSet& train_set, const ExampleSet& validation,
                            const TrainConfig& config) {
  config.validate();
  const auto d = m.backbone().feature_dim();
  check_examples(train_set, d, "training");
  check_examples(validation, d, "validation");
  m.norm() = fit_normalization(train_set);

  ProbeGradients vel{Matrix::Zero(m.weight().rows(), m.weight().cols()), Vector::Zero(m.bias().size())};
  auto step = [&](const std::vector<Eigen::Index>& cols) {
    ProbeGradients g;
    const double loss = probe_loss(m, gather(train_set.features, cols), gather(train_set.targets, cols),
                                   config.huber_delta, &g);
    const double clip = clip_factor(config, g.W, g.b);
    sgd_step(m.weight(), vel.W, g.W, config, clip);
    sgd_step(m.bias(), vel.b, g.b, config, clip);
    return loss;
  };
  auto evaluate = [&] {
    return probe_loss(m, validation.features, validation.targets, config.huber_delta, nullptr);
  };
  return run_loop(train_set.size(), config, step, evaluate);
}

}  // namespace wristloc::train
