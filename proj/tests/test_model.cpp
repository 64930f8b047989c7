#include "support.hpp"

#include "wristloc/checkpoint.hpp"
#include "wristloc/dataset.hpp"
#include "wristloc/model.hpp"
#include "wristloc/rng.hpp"
#include "wristloc/routing.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace wristloc;
using namespace wristloc::model;

namespace {

Matrix random_matrix(Rng& rng, int rows, int cols, double r = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-r, r);
  }
  return m;
}

Raster noise_image(std::uint64_t seed, int size = 64) {
  Rng rng(seed);
  Raster img(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) img.set_pixel(r, c, {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
  }
  return img;
}

const std::string kPrompt = data::build_prompt("red cup", Pose(Vec3(100, 200, 300), 1, 0, 0, 0));

}  // namespace

TEST_CASE("quantize examples") {
  const auto zero = quantize_linear(Matrix::Zero(4, 70));
  for (auto c : zero.codes) CHECK(c == 0);
  for (auto s : zero.scales) CHECK(s == 0.0);
  CHECK(dequantize(zero) == Matrix::Zero(4, 70));

  Matrix block(1, 4);
  block << 7, -7, 3.5, 0;
  const auto q = quantize_linear(block, 4);
  REQUIRE(q.scales.size() == 1);
  CHECK(q.scales[0] == 1.0);
  CHECK(std::vector<int>(q.codes.begin(), q.codes.end()) == std::vector<int>{7, -7, 4, 0});
  // 2.5 rounds to even as well
  Matrix half(1, 3);
  half << 7, 2.5, -2.5;
  const auto qh = quantize_linear(half, 3);
  CHECK(std::vector<int>(qh.codes.begin(), qh.codes.end()) == std::vector<int>{7, 2, -2});

  const auto shaped = dequantize(quantize_linear(Matrix::Ones(5, 9), 4));
  CHECK(shaped.rows() == 5);
  CHECK(shaped.cols() == 9);
  CHECK_ERROR(quantize_linear(block, 0), ErrorCode::InvalidArgument);
}

TEST_CASE("quantization bound on random matrices with uneven blocks") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + static_cast<int>(rng.below(20));
    const int cols = 1 + static_cast<int>(rng.below(90));
    const int block = 1 + static_cast<int>(rng.below(80));
    const Matrix w = random_matrix(rng, rows, cols, rng.uniform(1e-3, 1e3));
    const auto q = quantize_linear(w, block);
    const Matrix back = dequantize(q);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const std::size_t flat = static_cast<std::size_t>(i) * cols + j;
        const double scale = q.scales[q.block_of(flat)];
        CHECK(std::abs(q.codes[flat]) <= 7);
        CHECK(std::abs(back(i, j) - w(i, j)) <= scale / 2 * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("constant-magnitude blocks reconstruct exactly") {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const double m = rng.uniform(1e-6, 1e6);
    Matrix w(2, 64);
    for (int k = 0; k < w.size(); ++k) w.data()[k] = rng.below(2) ? m : -m;
    CHECK(dequantize(quantize_linear(w)) == w);
  }
}

TEST_CASE("lora_forward examples") {
  Rng rng(12);
  const Matrix w = random_matrix(rng, 6, 5);
  Vector x(5);
  x << 0.3, -1.2, 2.0, 0.7, -0.1;

  auto fresh = make_lora(5, 6, 2, 16.0, 3);
  CHECK(fresh.B.isZero(0));
  CHECK(lora_forward(w, fresh, x) == w * x);
  const auto q = quantize_linear(w);
  CHECK(lora_forward(q, fresh, x) == dequantize(q) * x);

  LoRAAdapter one;
  one.A = Matrix::Zero(1, 5);
  one.A(0, 0) = 1;
  one.B = Matrix::Zero(6, 1);
  one.B(0, 0) = 1;
  one.alpha = 1;
  Vector expect = w * x;
  expect(0) += x(0);
  CHECK((lora_forward(w, one, x) - expect).norm() < 1e-12);

  auto a = make_lora(5, 6, 3, 2.0, 8);
  a.B = random_matrix(rng, 6, 3);
  auto b = a;
  b.alpha = 4.0;
  const Vector da = lora_forward(w, a, x) - w * x;
  const Vector db = lora_forward(w, b, x) - w * x;
  CHECK((db - 2 * da).norm() < 1e-12);

  CHECK_ERROR(lora_forward(w, a, Vector::Zero(4)), ErrorCode::DimensionMismatch);
  CHECK_ERROR(make_lora(5, 6, 0, 16, 1), ErrorCode::InvalidArgument);
  CHECK_ERROR(make_lora(5, 6, 6, 16, 1), ErrorCode::InvalidArgument);

  // A ~ U(-1/sqrt(d_in), 1/sqrt(d_in))
  const auto big = make_lora(256, 256, 8, 16, 5);
  CHECK(big.A.cwiseAbs().maxCoeff() <= 1.0 / 16.0);
  CHECK(big.A.cwiseAbs().maxCoeff() > 0.9 / 16.0);
}

TEST_CASE("route examples") {
  const auto g = route("question: what color is the object?");
  CHECK(g.path == RoutePath::GeneralPath);
  REQUIRE(g.matched_signifier.has_value());
  CHECK(*g.matched_signifier == "question");
  CHECK(route(kPrompt).path == RoutePath::RegressionPath);
  CHECK_FALSE(route(kPrompt).matched_signifier.has_value());
  CHECK(route("Questionnaire on the table").path == RoutePath::RegressionPath);
  CHECK(route("QUESTION, please").path == RoutePath::GeneralPath);
  CHECK(route("a question?").path == RoutePath::GeneralPath);
  CHECK(route("questions about it").path == RoutePath::RegressionPath);
  CHECK(route("pre-question").path == RoutePath::GeneralPath);
  CHECK(route("ask me", "ask").path == RoutePath::GeneralPath);
  CHECK_ERROR(route(""), ErrorCode::InvalidArgument);
}

TEST_CASE("contains_word agrees with a token-split oracle") {
  Rng rng(31);
  const char alphabet[] = "qQuestion !.,-_2";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const int len = 1 + static_cast<int>(rng.below(24));
    for (int i = 0; i < len; ++i) s += alphabet[rng.below(sizeof alphabet - 1)];
    if (trial % 3 == 0) s.insert(rng.below(s.size() + 1), "question");
    bool oracle = false;
    std::string word;
    for (char c : s + " ") {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else {
        oracle |= word == "question";
        word.clear();
      }
    }
    CHECK(contains_word(s, "question") == oracle);
    CHECK((route(s).path == RoutePath::GeneralPath) == oracle);
    CHECK(route(s).matched_signifier.has_value() == oracle);
  }
}

TEST_CASE("backbone features are deterministic and sized") {
  const ToyBackbone a, b;
  CHECK(a.feature_dim() == 256);
  const auto img = noise_image(1);
  const Vector fa = a.features(img, kPrompt);
  CHECK(fa.size() == 256);
  CHECK(fa.allFinite());
  CHECK(fa == b.features(img, kPrompt));
  CHECK(a.text_features(kPrompt) != a.text_features(data::build_prompt("blue box", Pose())));
  CHECK_ERROR(a.features(noise_image(1, 32), kPrompt), ErrorCode::DimensionMismatch);
}

TEST_CASE("trainable parameter set") {
  const PositionModel m;
  const auto set = m.trainable_parameters();
  CHECK(m.adapter().parameter_count() == 4096);
  CHECK(set.contains("lora.A"));
  CHECK(set.contains("lora.B"));
  CHECK(set.contains("head.W1"));
  CHECK_FALSE(set.contains("fusion"));
  CHECK_FALSE(set.contains("backbone.opponent"));
  const std::size_t head = 256 * 128 + 128 + 128 * 3 + 3;
  CHECK(m.head().parameter_count() == head);
  CHECK(set.total() == 4096 + head);

  const LinearProbe probe;
  CHECK(probe.trainable_parameters().total() == 3 * 256 + 3);
}

TEST_CASE("zero-init identity is exact") {
  const PositionModel m;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Vector f = m.backbone().features(noise_image(s), kPrompt);
    CHECK(m.adapted_features(f) == m.base_features(f));
    const Vec3 p = m.predict_from_features(f);
    CHECK(p == m.head().forward(m.base_features(f)));
    CHECK(p.allFinite());
  }
}

TEST_CASE("predict_position contract") {
  const PositionModel m;
  const auto img = noise_image(7);
  const Vec3 a = m.predict_position(img, kPrompt);
  CHECK(a.allFinite());
  CHECK(a == m.predict_position(img, kPrompt));
  CHECK(a == m.predict_from_features(m.backbone().features(img, kPrompt)));
  CHECK_ERROR(m.predict_position(img, "question: where is it"), ErrorCode::RoutingViolation);
  CHECK_ERROR(m.predict_position(noise_image(7, 16), kPrompt), ErrorCode::DimensionMismatch);
}

TEST_CASE("general_answer uses only frozen parts") {
  PositionModel m;
  Rng rng(2);
  m.adapter().B = random_matrix(rng, m.adapter().B.rows(), m.adapter().B.cols());
  const auto trainable = m.trainable_hash();
  const auto frozen = m.frozen_hash();

  Raster red(64, 64, {0.8, 0.2, 0.1});
  const auto answer = m.general_answer(red, "question: describe");
  CHECK(answer.find("red") != std::string::npos);
  CHECK(m.general_answer(Raster(64, 64, {0.1, 0.2, 0.9}), "Question: describe").find("blue") != std::string::npos);
  CHECK(m.trainable_hash() == trainable);
  CHECK(m.frozen_hash() == frozen);
  CHECK_ERROR(m.general_answer(red, kPrompt), ErrorCode::RoutingViolation);
}

TEST_CASE("frozen and trainable hashes separate the parameter groups") {
  PositionModel m;
  const auto frozen = m.frozen_hash();
  const auto trainable = m.trainable_hash();
  m.head().W1(0, 0) += 1.0;
  m.adapter().B(1, 1) = 0.5;
  CHECK(m.frozen_hash() == frozen);
  CHECK(m.trainable_hash() != trainable);

  ModelConfig other;
  other.seed = 2;
  CHECK(PositionModel(other).frozen_hash() != frozen);
  CHECK(PositionModel().frozen_hash() == frozen);
}

TEST_CASE("fusion is near identity and quantized") {
  const PositionModel m;
  const Matrix& w = m.fusion_weight();
  CHECK(w == dequantize(m.fusion()));
  CHECK(w.rows() == 256);
  CHECK(w.cols() == 256);
  CHECK(w.diagonal().minCoeff() > 0.5);
  CHECK(m.fusion_bias().minCoeff() >= 1.9);
  CHECK(m.fusion_bias().maxCoeff() <= 2.1);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  PositionModel m;
  Rng rng(6);
  m.adapter().B = random_matrix(rng, m.adapter().B.rows(), m.adapter().B.cols());
  m.head().norm.output_offset << 1, 2, 3;
  save_checkpoint(dir / "m.ckpt", m);
  CHECK(checkpoint_kind(dir / "m.ckpt") == CheckpointKind::Position);
  const auto back = load_position_model(dir / "m.ckpt");
  CHECK(back.frozen_hash() == m.frozen_hash());
  CHECK(back.trainable_hash() == m.trainable_hash());
  const auto img = noise_image(3);
  CHECK(back.predict_position(img, kPrompt) == m.predict_position(img, kPrompt));

  std::ostringstream a, b;
  write_checkpoint(a, m);
  write_checkpoint(b, back);
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, 4) == "WLCK");

  LinearProbe probe;
  probe.weight() = random_matrix(rng, 3, 256);
  probe.bias() << 4, 5, 6;
  save_checkpoint(dir / "p.ckpt", probe);
  CHECK(checkpoint_kind(dir / "p.ckpt") == CheckpointKind::LinearProbe);
  const auto pback = load_linear_probe(dir / "p.ckpt");
  CHECK(pback.predict_position(img, kPrompt) == probe.predict_position(img, kPrompt));
  CHECK(load_regressor(dir / "p.ckpt")->predict_position(img, kPrompt) == probe.predict_position(img, kPrompt));
  CHECK(load_regressor(dir / "m.ckpt")->predict_position(img, kPrompt) == m.predict_position(img, kPrompt));

  CHECK_ERROR(load_linear_probe(dir / "m.ckpt"), ErrorCode::CheckpointError);
  CHECK_ERROR(load_position_model(dir / "p.ckpt"), ErrorCode::CheckpointError);
  CHECK_ERROR(load_position_model(dir / "absent.ckpt"), ErrorCode::IOFailure);
}

TEST_CASE("checkpoint rejects damaged files") {
  std::ostringstream s;
  write_checkpoint(s, PositionModel());
  const std::string good = s.str();

  auto load = [](const std::string& bytes) {
    std::istringstream in(bytes);
    return read_position_model(in);
  };
  CHECK_NOTHROW(load(good));

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_ERROR(load(bad_magic), ErrorCode::CheckpointError);

  std::string bad_version = good;
  bad_version[4] = 9;
  CHECK_ERROR(load(bad_version), ErrorCode::VersionError);

  std::string bad_prompt = good;
  bad_prompt[8] = 9;
  CHECK_ERROR(load(bad_prompt), ErrorCode::VersionError);

  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, good.size() / 2, good.size() - 1}) {
    CHECK_ERROR(load(good.substr(0, cut)), ErrorCode::CheckpointError);
  }
}
