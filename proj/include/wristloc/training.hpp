#pragma once

#include "wristloc/dataset.hpp"
#include "wristloc/model.hpp"

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace wristloc::train {

using model::Matrix;
using model::Vector;

/// Mean over the three coordinates of the Huber penalty with knee delta.
double huber_loss(const Vec3& pred, const Vec3& target, double delta);
/// d huber_loss / d pred.
Vec3 huber_grad(const Vec3& pred, const Vec3& target, double delta);

struct TrainConfig {
  int epochs = 40;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double huber_delta = 10.0;
  int batch_size = 16;
  std::uint64_t seed = 0;
  int plateau_patience = 5;
  double plateau_min_delta = 0.0;      // absolute floor, loss units
  double plateau_relative_delta = 0.01;  // fraction of the best loss so far
  double max_grad_norm = 10.0;  // global L2 clip per step, 0 disables
  double weight_decay = 0.0;   // L2 coefficient added to the gradient

  void validate() const;  // InvalidConfig
};

struct EpochStats {
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  bool stopped_early = false;

  std::vector<double> validation_losses() const;
  double final_validation_loss() const;
  /// epoch,train_loss,val_loss,seconds
  void write_csv(std::ostream& out, bool include_seconds = true) const;
};

/// True iff the history is longer than `patience` and the best loss of the
/// last `patience` epochs improves on the best loss before them by no more
/// than min_delta.
bool detect_plateau(const std::vector<double>& validation_losses, int patience, double min_delta);

/// Backbone features and targets, one column per frame.
struct ExampleSet {
  Matrix features;  // d x N
  Matrix targets;   // 3 x N
  std::vector<std::string> ids;

  Eigen::Index size() const { return features.cols(); }
  ExampleSet subset(const std::vector<Eigen::Index>& columns) const;
};

/// Backbone features keyed by (image, prompt). The backbone is frozen, so
/// features can be computed once and shared by every fold and model.
class FeatureBank {
 public:
  explicit FeatureBank(const model::ToyBackbone& backbone) : backbone_(backbone) {}
  const Vector& get(const data::FrameRecord& record);
  ExampleSet examples(const std::vector<data::FrameRecord>& records);
  /// Fills the cache for `records` using `jobs` threads. Cached values do not
  /// depend on the thread count.
  void prefetch(const std::vector<data::FrameRecord>& records, int jobs);
  const model::ToyBackbone& backbone() const { return backbone_; }

 private:
  model::ToyBackbone backbone_;
  std::unordered_map<std::string, Vector> cache_;
};

/// Input standardization and output de-standardization fitted to a training
/// set. Per-dimension std is floored at 5% of the mean std, and at 1 mm for
/// targets.
model::Normalization fit_normalization(const ExampleSet& train);

struct PositionGradients {
  Matrix A, B, W1;
  Vector b1;
  Matrix W2;
  Vector b2;
};

struct ProbeGradients {
  Matrix W;
  Vector b;
};

/// Mean per-frame Huber loss over the batch, and optionally its gradient
/// with respect to every trainable parameter.
double batch_loss(const model::PositionModel& m, const ExampleSet& batch, double delta,
                  PositionGradients* grad = nullptr);
double batch_loss(const model::LinearProbe& m, const ExampleSet& batch, double delta,
                  ProbeGradients* grad = nullptr);

/// Fits normalization on `train`, then runs momentum SGD on the adapter and
/// head until `epochs` or a validation plateau. Throws NonFiniteLoss,
/// EmptyInput, DimensionMismatch.
TrainHistory train(model::PositionModel& m, const ExampleSet& train, const ExampleSet& validation,
                   const TrainConfig& config);
/// Same loop for the single linear layer.
TrainHistory train_baseline(model::LinearProbe& m, const ExampleSet& train,
                            const ExampleSet& validation, const TrainConfig& config);

}  // namespace wristloc::train
