#include "support.hpp"
#include "gradcheck.hpp"

#include "wristloc/dataset.hpp"
#include "wristloc/training.hpp"

#include <sstream>

using namespace wristloc;
using namespace wristloc::train;
using doctest::Approx;

namespace {

// 256-dim non-negative features with a target that is a smooth function of them.
ExampleSet toy_task(int n, std::uint64_t seed) {
  Rng rng(seed);
  ExampleSet set;
  set.features.resize(256, n);
  set.targets.resize(3, n);
  for (int i = 0; i < n; ++i) {
    const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
    for (int k = 0; k < 256; ++k) {
      const double mix = std::sin(0.37 * k) * a + std::cos(0.11 * k) * b + ((k % 7) - 3) * 0.2 * c;
      set.features(k, i) = std::max(0.0, 1.0 + mix + 0.05 * rng.uniform(-1, 1));
    }
    set.targets.col(i) = Vec3(400 + 120 * a, 90 * b + 20 * a * a, 30 + 15 * c);
  }
  return set;
}

std::vector<double> losses_of(const TrainHistory& h) {
  std::vector<double> out;
  for (const auto& e : h.epochs) {
    out.push_back(e.train_loss);
    out.push_back(e.validation_loss);
  }
  return out;
}

}  // namespace

TEST_CASE("huber examples") {
  CHECK(huber_loss(Vec3(1, 2, 3), Vec3(1, 2, 3), 1.0) == 0.0);
  CHECK(huber_loss(Vec3(0.5, 0, 0), Vec3::Zero(), 1.0) == Approx(0.125 / 3).epsilon(1e-15));
  CHECK(huber_loss(Vec3(2, 0, 0), Vec3::Zero(), 1.0) == Approx(0.5).epsilon(1e-15));
  CHECK(huber_loss(Vec3(-2, 0, 0), Vec3::Zero(), 1.0) == Approx(0.5).epsilon(1e-15));
  CHECK(huber_loss(Vec3(0, 30, -4), Vec3::Zero(), 10.0) == Approx((10 * 25 + 8.0) / 3).epsilon(1e-15));
}

TEST_CASE("huber is continuous with a continuous derivative at the knee") {
  for (double delta : {0.5, 1.0, 10.0}) {
    const double eps = 1e-9 * delta;
    for (double sign : {-1.0, 1.0}) {
      const Vec3 lo(sign * (delta - eps), 0, 0), hi(sign * (delta + eps), 0, 0);
      CHECK(std::abs(huber_loss(lo, Vec3::Zero(), delta) - huber_loss(hi, Vec3::Zero(), delta)) < 1e-8 * delta);
      CHECK(std::abs(huber_grad(lo, Vec3::Zero(), delta)(0) - huber_grad(hi, Vec3::Zero(), delta)(0)) < 1e-8);
    }
    // grid around the knee: derivative matches central differences on both sides
    for (double r = 0.8 * delta; r <= 1.2 * delta; r += 0.01 * delta) {
      if (std::abs(r - delta) < 1e-3 * delta) continue;
      const double h = 1e-6 * delta;
      const double fd = (huber_loss(Vec3(r + h, 0, 0), Vec3::Zero(), delta) -
                         huber_loss(Vec3(r - h, 0, 0), Vec3::Zero(), delta)) / (2 * h);
      CHECK(huber_grad(Vec3(r, 0, 0), Vec3::Zero(), delta)(0) == Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("detect_plateau examples") {
  CHECK_FALSE(detect_plateau({10, 9, 8, 7, 6, 5, 4}, 3, 0.0));
  CHECK(detect_plateau({5, 4, 3, 3, 3, 3}, 3, 0.0));
  CHECK_FALSE(detect_plateau({5, 4}, 3, 0.0));
  CHECK_FALSE(detect_plateau({5, 4, 3}, 3, 0.0));
  CHECK(detect_plateau({5, 4, 3, 2.95, 2.99, 3}, 3, 0.1));
  CHECK_FALSE(detect_plateau({5, 4, 3, 2.85, 2.99, 3}, 3, 0.1));
  CHECK_ERROR(detect_plateau({1, 2}, 0, 0.0), ErrorCode::InvalidArgument);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_ERROR(c.validate(), ErrorCode::InvalidConfig);
  c = {};
  c.learning_rate = 0;
  CHECK_ERROR(c.validate(), ErrorCode::InvalidConfig);
  c = {};
  c.momentum = 1.0;
  CHECK_ERROR(c.validate(), ErrorCode::InvalidConfig);
  c = {};
  c.huber_delta = -1;
  CHECK_ERROR(c.validate(), ErrorCode::InvalidConfig);
  c = {};
  c.plateau_patience = 0;
  CHECK_ERROR(c.validate(), ErrorCode::InvalidConfig);
}

TEST_CASE("gradient check, adapted model, both Huber branches") {
  auto m = testing::perturbed_model(3);
  const auto batch = testing::offset_batch(m, {Vec3(2, -3, 25), Vec3(-40, 5, 1), Vec3(0.5, 15, -7)}, 8);
  const auto r = testing::check_gradients(m, batch, 10.0, 1e-4, 37);
  CHECK(r.quadratic_residuals > 0);
  CHECK(r.linear_residuals > 0);
  CHECK(r.checked > 1000);
  INFO("worst entry " << r.worst_tensor);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("gradient check, linear probe") {
  model::LinearProbe probe;
  Rng rng(5);
  for (Eigen::Index k = 0; k < probe.weight().size(); ++k) probe.weight().data()[k] = rng.uniform(-0.1, 0.1);
  probe.norm().output_scale << 50, 50, 50;
  const auto batch = testing::offset_batch(probe, {Vec3(2, -3, 25), Vec3(-40, 5, 1), Vec3(0.5, 15, -7)}, 9);
  const auto r = testing::check_gradients(probe, batch, 10.0);
  CHECK(r.quadratic_residuals > 0);
  CHECK(r.linear_residuals > 0);
  CHECK(r.checked == 3 * 256 + 3);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("training descends, is deterministic and keeps the base frozen") {
  const auto train_set = toy_task(200, 1);
  const auto val_set = toy_task(60, 2);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 4;
  cfg.plateau_patience = 20;

  model::PositionModel a;
  const auto frozen = a.frozen_hash();
  const auto ha = train::train(a, train_set, val_set, cfg);
  REQUIRE(ha.epochs.size() == 20);
  CHECK(ha.epochs.back().train_loss < ha.epochs.front().train_loss);
  CHECK(ha.epochs.back().validation_loss < ha.epochs.front().validation_loss);
  CHECK(a.frozen_hash() == frozen);
  for (const auto& e : ha.epochs) {
    CHECK(std::isfinite(e.train_loss));
    CHECK(e.validation_loss >= 0.0);
    CHECK(e.seconds >= 0.0);
  }

  model::PositionModel b;
  const auto hb = train::train(b, train_set, val_set, cfg);
  CHECK(losses_of(ha) == losses_of(hb));
  CHECK(a.trainable_hash() == b.trainable_hash());

  cfg.seed = 5;
  model::PositionModel c;
  CHECK(losses_of(train::train(c, train_set, val_set, cfg)) != losses_of(ha));
}

TEST_CASE("plateau stops training early") {
  const auto train_set = toy_task(64, 1);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-7;
  cfg.plateau_patience = 3;
  model::LinearProbe probe;
  const auto h = train_baseline(probe, train_set, train_set, cfg);
  CHECK(h.stopped_early);
  CHECK(h.epochs.size() < 200);
  const auto losses = h.validation_losses();
  CHECK(detect_plateau(losses, 3, 0.01 * *std::min_element(losses.begin(), losses.end())));
}

TEST_CASE("baseline fits a realizable linear task") {
  Rng rng(8);
  const Matrix P = Matrix::NullaryExpr(256, 3, [&] { return rng.uniform(-1, 1); });
  ExampleSet set;
  set.features.resize(256, 200);
  set.targets.resize(3, 200);
  for (int i = 0; i < 200; ++i) {
    const Vec3 t(rng.uniform(300, 500), rng.uniform(-100, 100), rng.uniform(10, 60));
    set.targets.col(i) = t;
    set.features.col(i) = P * (t - Vec3(400, 0, 35)) / 100.0;
  }
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 1e-5;  // 256 collinear unit-variance inputs: keep lr below 2/curvature
  cfg.plateau_patience = 300;
  model::LinearProbe probe;
  const auto frozen = probe.frozen_hash();
  const auto h = train_baseline(probe, set, set, cfg);
  CHECK(h.final_validation_loss() < 1e-3);
  CHECK(probe.frozen_hash() == frozen);
  CHECK(probe.trainable_parameters().total() == 3 * 256 + 3);
}

TEST_CASE("training errors") {
  const auto good = toy_task(10, 1);
  model::PositionModel m;
  CHECK_ERROR(train::train(m, ExampleSet{Matrix(256, 0), Matrix(3, 0), {}}, good, TrainConfig{}), ErrorCode::EmptyInput);
  CHECK_ERROR(train::train(m, ExampleSet{Matrix::Zero(10, 4), Matrix::Zero(3, 4), {}}, good, TrainConfig{}),
              ErrorCode::DimensionMismatch);
  auto bad = good;
  bad.targets(0, 3) = std::numeric_limits<double>::infinity();
  CHECK_ERROR(train::train(m, good, bad, TrainConfig{}), ErrorCode::NonFiniteLoss);
  TrainConfig zero;
  zero.batch_size = 0;
  CHECK_ERROR(train::train(m, good, good, zero), ErrorCode::InvalidConfig);
}

TEST_CASE("history CSV") {
  TrainHistory h;
  h.epochs.push_back({2.5, 3.0, 0.25});
  h.epochs.push_back({1.5, 2.0, 0.5});
  std::ostringstream a, b;
  h.write_csv(a);
  h.write_csv(b, false);
  CHECK(a.str() == "epoch,train_loss,val_loss,seconds\n1,2.5,3,0.250000\n2,1.5,2,0.500000\n");
  CHECK(b.str() == "epoch,train_loss,val_loss\n1,2.5,3\n2,1.5,2\n");
  CHECK(h.final_validation_loss() == 2.0);
  CHECK_ERROR(TrainHistory{}.final_validation_loss(), ErrorCode::EmptyInput);
}

TEST_CASE("fit_normalization") {
  ExampleSet set;
  set.features = Matrix::Zero(4, 3);
  set.features.row(0) << 1, 2, 3;
  set.targets = Matrix::Zero(3, 3);
  set.targets.row(0) << 10, 20, 30;
  const auto n = fit_normalization(set);
  CHECK(n.input_mean(0) == Approx(2.0));
  CHECK(n.input_inv_std(0) == Approx(1.0 / std::sqrt(2.0 / 3.0)));
  CHECK(n.output_offset(0) == Approx(20.0));
  CHECK(n.output_scale(1) == 1.0);  // 1 mm floor
  CHECK_ERROR(fit_normalization(ExampleSet{Matrix(4, 0), Matrix(3, 0), {}}), ErrorCode::EmptyInput);
}

TEST_CASE("feature bank prefetch does not depend on the thread count") {
  testing::TempDir dir("bank");
  synth::emit_dataset(dir.path(), 3, 2, 5, synth::DatasetConfig{});
  const auto records = data::load_dataset(dir.path());
  model::ToyBackbone backbone;
  FeatureBank serial(backbone), threaded(backbone);
  threaded.prefetch(records, 3);
  const auto a = serial.examples(records);
  const auto b = threaded.examples(records);
  CHECK(a.features == b.features);
  CHECK(a.targets == b.targets);
  CHECK(a.ids == b.ids);
  CHECK(a.features.col(0) == backbone.features(read_png(records[0].image_ref), records[0].prompt));

  auto missing = records;
  missing[0].image_ref = dir / "nope.png";
  missing[0].prompt += " ";
  CHECK_ERROR(FeatureBank(backbone).prefetch(missing, 2), ErrorCode::IOFailure);
}
