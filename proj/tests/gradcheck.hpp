#pragma once

// Central finite differences against the analytic gradients of batch_loss.

#include "wristloc/model.hpp"
#include "wristloc/rng.hpp"
#include "wristloc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace testing {

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  int quadratic_residuals = 0;  // |r| < delta
  int linear_residuals = 0;     // |r| > delta
};

// Relative error with a small absolute floor so that entries whose gradient
// is zero up to rounding do not dominate.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7});
}

/// Batch of `n` random non-negative feature columns whose targets sit at the
/// model's current prediction plus the given per-coordinate offsets.
inline wristloc::train::ExampleSet offset_batch(const wristloc::model::PositionRegressor& m,
                                                const std::vector<wristloc::Vec3>& offsets, std::uint64_t seed) {
  wristloc::Rng rng(seed);
  const int d = m.backbone().feature_dim();
  wristloc::train::ExampleSet set;
  set.features.resize(d, static_cast<Eigen::Index>(offsets.size()));
  set.targets.resize(3, static_cast<Eigen::Index>(offsets.size()));
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    for (int k = 0; k < d; ++k) set.features(k, static_cast<Eigen::Index>(i)) = rng.uniform(0.0, 2.0);
    set.targets.col(static_cast<Eigen::Index>(i)) =
        m.predict_from_features(set.features.col(static_cast<Eigen::Index>(i))) + offsets[i];
  }
  return set;
}

inline void count_branches(const wristloc::model::PositionRegressor& m, const wristloc::train::ExampleSet& batch,
                           double delta, GradCheck& out) {
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const wristloc::Vec3 r = m.predict_from_features(batch.features.col(i)) - batch.targets.col(i);
    for (int c = 0; c < 3; ++c) {
      if (std::abs(r(c)) < delta) ++out.quadratic_residuals;
      if (std::abs(r(c)) > delta) ++out.linear_residuals;
    }
  }
}

template <typename Model, typename Loss>
void compare_tensor(Model& m, const std::string& name, double* values, const double* analytic, std::size_t size,
                    std::size_t stride, double h, Loss loss, GradCheck& out) {
  for (std::size_t k = 0; k < size; k += stride) {
    const double saved = values[k];
    values[k] = saved + h;
    const double up = loss(m);
    values[k] = saved - h;
    const double down = loss(m);
    values[k] = saved;
    const double rel = relative_error(analytic[k], (up - down) / (2 * h));
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst_tensor = name + "[" + std::to_string(k) + "]";
    }
    ++out.checked;
  }
}

/// Checks every `stride`-th entry of every trainable tensor.
inline GradCheck check_gradients(wristloc::model::PositionModel& m, const wristloc::train::ExampleSet& batch,
                                 double delta, double h = 1e-4, std::size_t stride = 1) {
  using namespace wristloc;
  GradCheck out;
  count_branches(m, batch, delta, out);
  train::PositionGradients g;
  train::batch_loss(m, batch, delta, &g);
  auto loss = [&](const model::PositionModel& mm) { return train::batch_loss(mm, batch, delta); };
  auto& ad = m.adapter();
  auto& head = m.head();
  compare_tensor(m, "lora.A", ad.A.data(), g.A.data(), ad.A.size(), stride, h, loss, out);
  compare_tensor(m, "lora.B", ad.B.data(), g.B.data(), ad.B.size(), stride, h, loss, out);
  compare_tensor(m, "head.W1", head.W1.data(), g.W1.data(), head.W1.size(), stride, h, loss, out);
  compare_tensor(m, "head.b1", head.b1.data(), g.b1.data(), head.b1.size(), stride, h, loss, out);
  compare_tensor(m, "head.W2", head.W2.data(), g.W2.data(), head.W2.size(), stride, h, loss, out);
  compare_tensor(m, "head.b2", head.b2.data(), g.b2.data(), head.b2.size(), stride, h, loss, out);
  return out;
}

inline GradCheck check_gradients(wristloc::model::LinearProbe& m, const wristloc::train::ExampleSet& batch,
                                 double delta, double h = 1e-4, std::size_t stride = 1) {
  using namespace wristloc;
  GradCheck out;
  count_branches(m, batch, delta, out);
  train::ProbeGradients g;
  train::batch_loss(m, batch, delta, &g);
  auto loss = [&](const model::LinearProbe& mm) { return train::batch_loss(mm, batch, delta); };
  compare_tensor(m, "probe.W", m.weight().data(), g.W.data(), m.weight().size(), stride, h, loss, out);
  compare_tensor(m, "probe.b", m.bias().data(), g.b.data(), m.bias().size(), stride, h, loss, out);
  return out;
}

/// Untrained model with a non-zero adapter, so every tensor has a gradient.
inline wristloc::model::PositionModel perturbed_model(std::uint64_t seed) {
  using namespace wristloc;
  model::PositionModel m;
  Rng rng(seed);
  auto& B = m.adapter().B;
  for (Eigen::Index k = 0; k < B.size(); ++k) B.data()[k] = rng.uniform(-0.05, 0.05);
  auto& norm = m.head().norm;
  norm.output_scale << 40.0, 30.0, 20.0;
  norm.output_offset << 400.0, 0.0, 30.0;
  return m;
}

}  // namespace testing
