#include "wristloc/model.hpp"

#include "wristloc/errors.hpp"
#include "wristloc/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cfenv>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace wristloc::model {

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_matrix(const Matrix& m, std::uint64_t h) {
  const std::int64_t dims[2] = {m.rows(), m.cols()};
  h = fnv1a(dims, sizeof dims, h);
  return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
}

namespace {

std::uint64_t hash_vector(const Vector& v, std::uint64_t h) {
  return fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), h);
}

Matrix uniform_matrix(Rng& rng, int rows, int cols, double bound) {
  Matrix m(rows, cols);
  // Column-major fill order is part of the reproducible weight layout.
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

Vector uniform_vector(Rng& rng, int n, double bound) {
  Vector v(n);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-bound, bound);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

QuantizedLinear quantize_linear(const Matrix& weights, int block_size) {
  if (block_size < 1) fail(ErrorCode::InvalidArgument, "block_size must be >= 1");
  if (!weights.allFinite()) fail(ErrorCode::InvalidArgument, "weights must be finite");
  QuantizedLinear q;
  q.rows = static_cast<int>(weights.rows());
  q.cols = static_cast<int>(weights.cols());
  q.block_size = block_size;
  const std::size_t n = static_cast<std::size_t>(weights.size());
  const std::size_t blocks = (n + block_size - 1) / block_size;
  q.codes.assign(n, 0);
  q.scales.assign(blocks, 0.0);
  q.absmax.assign(blocks, 0.0);

  auto flat = [&](std::size_t i) {
    return weights(static_cast<Eigen::Index>(i / q.cols), static_cast<Eigen::Index>(i % q.cols));
  };
  const int saved_round = std::fegetround();
  std::fesetround(FE_TONEAREST);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * block_size;
    const std::size_t hi = std::min(n, lo + block_size);
    double amax = 0.0;
    for (std::size_t i = lo; i < hi; ++i) amax = std::max(amax, std::abs(flat(i)));
    if (amax == 0.0) continue;
    const double scale = amax / 7.0;
    q.absmax[b] = amax;
    q.scales[b] = scale;
    for (std::size_t i = lo; i < hi; ++i) {
      const double code = std::clamp(std::nearbyint(flat(i) / scale), -7.0, 7.0);
      q.codes[i] = static_cast<std::int8_t>(code);
    }
  }
  std::fesetround(saved_round);
  return q;
}

Matrix dequantize(const QuantizedLinear& q) {
  Matrix m(q.rows, q.cols);
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    const std::size_t b = q.block_of(i);
    m(static_cast<Eigen::Index>(i / q.cols), static_cast<Eigen::Index>(i % q.cols)) =
        (static_cast<double>(q.codes[i]) / 7.0) * q.absmax[b];
  }
  return m;
}

// ---------------------------------------------------------------------------
// LoRA
// ---------------------------------------------------------------------------

LoRAAdapter make_lora(int d_in, int d_out, int rank, double alpha, std::uint64_t seed) {
  if (rank < 1 || rank > std::min(d_in, d_out)) {
    fail(ErrorCode::InvalidArgument, "LoRA rank must be in [1, min(d_in, d_out)]");
  }
  Rng rng(seed);
  LoRAAdapter a;
  a.A = uniform_matrix(rng, rank, d_in, 1.0 / std::sqrt(static_cast<double>(d_in)));
  a.B = Matrix::Zero(d_out, rank);
  a.alpha = alpha;
  return a;
}

Vector lora_forward(const Matrix& base_weight, const LoRAAdapter& adapter, const Vector& x) {
  if (base_weight.cols() != x.size() || adapter.A.cols() != x.size() ||
      adapter.B.rows() != base_weight.rows() || adapter.B.cols() != adapter.A.rows()) {
    fail(ErrorCode::DimensionMismatch, "lora_forward: dimensions of base, adapter and input disagree");
  }
  const Vector ax = adapter.A * x;
  return base_weight * x + adapter.scale() * (adapter.B * ax);
}

Vector lora_forward(const QuantizedLinear& base, const LoRAAdapter& adapter, const Vector& x) {
  return lora_forward(dequantize(base), adapter, x);
}

// ---------------------------------------------------------------------------
// Backbone
// ---------------------------------------------------------------------------

ToyBackbone::ToyBackbone(const BackboneConfig& config) : config_(config) {
  if (config.image_width < 4 || config.image_height < 4 || config.hue_channels < 1 ||
      !(config.hue_sharpness >= 1.0) || !(config.chroma_gate >= 0.0) ||
      !(config.bright_level > config.dark_level) || config.numeric_dim < 1 ||
      config.text_dim <= config.numeric_dim || config.text_buckets < 1) {
    fail(ErrorCode::InvalidArgument, "invalid backbone config");
  }
  weights_.opponent.resize(3, 3);
  weights_.opponent << 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0,  //
      1.0, -1.0, 0.0,                                     //
      -0.5, -0.5, 1.0;
  weights_.hue_filters.resize(config.hue_channels, 2);
  for (int k = 0; k < config.hue_channels; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / config.hue_channels;
    weights_.hue_filters(k, 0) = std::cos(theta);
    weights_.hue_filters(k, 1) = std::sin(theta);
  }
  Rng rng(derive_seed(config.seed, 0xBAC));
  weights_.numeric_embedding = uniform_matrix(rng, config.text_buckets, config.numeric_dim, 1.0);
}

ToyBackbone ToyBackbone::from_weights(const BackboneConfig& config, Weights weights) {
  ToyBackbone b(config);
  const auto& ref = b.weights_;
  auto same_shape = [](const Matrix& a, const Matrix& c) {
    return a.rows() == c.rows() && a.cols() == c.cols();
  };
  if (!same_shape(ref.opponent, weights.opponent) || !same_shape(ref.hue_filters, weights.hue_filters) ||
      !same_shape(ref.numeric_embedding, weights.numeric_embedding)) {
    fail(ErrorCode::DimensionMismatch, "backbone weights do not match the config");
  }
  b.weights_ = std::move(weights);
  return b;
}

void ToyBackbone::check_image(const Raster& image) const {
  if (image.width() != config_.image_width || image.height() != config_.image_height) {
    fail(ErrorCode::DimensionMismatch,
         "image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
             ", backbone expects " + std::to_string(config_.image_width) + "x" +
             std::to_string(config_.image_height));
  }
}

namespace {

// Mass, centroid and spread of a non-negative map, coordinates in [-1, 1].
void map_readout(const std::vector<double>& m, int rows, int cols, Vector& out, Eigen::Index& pos) {
  const double hu = (cols - 1) / 2.0;
  const double hv = (rows - 1) / 2.0;
  double total = 0.0, su = 0.0, sv = 0.0, suu = 0.0, svv = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double v = (r - hv) / hv;
    for (int k = 0; k < cols; ++k) {
      const double w = m[static_cast<std::size_t>(r) * cols + k];
      const double u = (k - hu) / hu;
      total += w;
      su += w * u;
      sv += w * v;
      suu += w * u * u;
      svv += w * v * v;
    }
  }
  out(pos++) = total / (rows * cols);
  if (total <= 1e-9) {
    for (int i = 0; i < 4; ++i) out(pos++) = 0.0;
    return;
  }
  const double cu = su / total;
  const double cv = sv / total;
  out(pos++) = cu;
  out(pos++) = cv;
  out(pos++) = std::sqrt(std::max(0.0, suu / total - cu * cu));
  out(pos++) = std::sqrt(std::max(0.0, svv / total - cv * cv));
}

std::uint64_t token_hash(std::string_view s) { return fnv1a(s.data(), s.size()); }

bool parse_number(const std::string& token, double& value) {
  if (token.empty()) return false;
  char* end = nullptr;
  value = std::strtod(token.c_str(), &end);
  return end == token.c_str() + token.size() && std::isfinite(value);
}

}  // namespace

Vector ToyBackbone::image_features(const Raster& image) const {
  check_image(image);
  const int rows = image.height();
  const int cols = image.width();
  const int npix = rows * cols;
  double mean[3] = {0.0, 0.0, 0.0};
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      for (int c = 0; c < 3; ++c) mean[c] += image.at(r, k, c);
    }
  }
  for (double& m : mean) m = std::max(m / npix, 1e-3);

  const int hues = config_.hue_channels;
  const auto& W = weights_;
  std::vector<std::vector<double>> maps(static_cast<std::size_t>(config_.image_channels()),
                                        std::vector<double>(static_cast<std::size_t>(npix), 0.0));
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      const Eigen::Vector3d x(image.at(r, k, 0) / mean[0], image.at(r, k, 1) / mean[1],
                              image.at(r, k, 2) / mean[2]);
      const Eigen::Vector3d lab = W.opponent * x;
      const double lum = lab(0);
      const double chroma = std::hypot(lab(1), lab(2));
      const auto i = static_cast<std::size_t>(r) * cols + k;
      const bool colored = chroma > config_.chroma_gate * lum && chroma > 1e-9;
      if (colored) {
        for (int h = 0; h < hues; ++h) {
          const double resp = W.hue_filters(h, 0) * lab(1) + W.hue_filters(h, 1) * lab(2);
          if (resp > 0.0) maps[h][i] = chroma * std::pow(resp / chroma, config_.hue_sharpness);
        }
      } else {
        maps[hues][i] = std::max(0.0, lum - config_.bright_level);
      }
      maps[hues + 1][i] = std::max(0.0, config_.dark_level - lum);
      maps[hues + 2][i] = (x.array() - 1.0).abs().sum();
    }
  }

  Vector out(config_.image_feature_dim());
  Eigen::Index pos = 0;
  for (const auto& m : maps) map_readout(m, rows, cols, out, pos);
  return out;
}

Vector ToyBackbone::text_features(std::string_view prompt) const {
  const int word_dim = config_.word_dim();
  Vector out = Vector::Zero(config_.text_dim);
  std::string token;
  std::string last_word = "<start>";
  int ordinal = 0;
  const std::uint64_t salt = derive_seed(config_.seed, 0x7E7);
  auto flush = [&] {
    while (!token.empty() && (token.back() == '.' || token.back() == '-')) token.pop_back();
    if (token.empty()) return;
    double value = 0.0;
    if (parse_number(token, value)) {
      const std::string key = last_word + "#" + std::to_string(ordinal++);
      const auto row = static_cast<Eigen::Index>(token_hash(key) % config_.text_buckets);
      out.tail(config_.numeric_dim) += (value / 100.0) * weights_.numeric_embedding.row(row).transpose();
    } else {
      const std::uint64_t h = fnv1a(token.data(), token.size(), salt);
      out(static_cast<Eigen::Index>(h % word_dim)) += ((h >> 63) != 0) ? 1.0 : -1.0;
      last_word = token;
      ordinal = 0;
    }
    token.clear();
  };
  for (char ch : prompt) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || ch == '.' || ch == '-') {
      token += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

Vector ToyBackbone::features(const Raster& image, std::string_view prompt) const {
  Vector f(feature_dim());
  f << image_features(image), text_features(prompt);
  return f;
}

std::string ToyBackbone::dominant_color(const Raster& image) const {
  double sums[3] = {0.0, 0.0, 0.0};
  for (int r = 0; r < image.height(); ++r) {
    for (int k = 0; k < image.width(); ++k) {
      for (int c = 0; c < 3; ++c) sums[c] += image.at(r, k, c);
    }
  }
  static constexpr const char* names[3] = {"red", "green", "blue"};
  const int best = static_cast<int>(std::max_element(sums, sums + 3) - sums);
  return names[best];
}

// ---------------------------------------------------------------------------
// Head
// ---------------------------------------------------------------------------

Normalization identity_normalization(int input_dim) {
  Normalization n;
  n.input_mean = Vector::Zero(input_dim);
  n.input_inv_std = Vector::Ones(input_dim);
  n.output_offset = Vector::Zero(3);
  n.output_scale = Vector::Ones(3);
  return n;
}

RegressionHead make_head(int input_dim, int hidden, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1) fail(ErrorCode::InvalidArgument, "invalid head dimensions");
  Rng rng(seed);
  RegressionHead h;
  h.W1 = uniform_matrix(rng, hidden, input_dim, std::sqrt(6.0 / input_dim));
  h.b1 = Vector::Zero(hidden);
  h.W2 = uniform_matrix(rng, 3, hidden, 0.1 * std::sqrt(6.0 / (hidden + 3.0)));
  h.b2 = Vector::Zero(3);
  h.norm = identity_normalization(input_dim);
  return h;
}

Vec3 RegressionHead::forward(const Vector& features) const {
  const Vector x = (features - norm.input_mean).cwiseProduct(norm.input_inv_std);
  const Vector hidden = (W1 * x + b1).cwiseMax(0.0);
  const Vector o = W2 * hidden + b2;
  return norm.output_offset + norm.output_scale.cwiseProduct(o);
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

std::size_t ParameterSet::total() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.count();
  return n;
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(tensors.begin(), tensors.end(), [&](const auto& t) { return t.name == name; });
}

Vec3 PositionRegressor::predict_position(const Raster& image, std::string_view prompt) const {
  const auto decision = route(prompt);
  if (decision.path != RoutePath::RegressionPath) {
    fail(ErrorCode::RoutingViolation, "prompt routes to the general path; refusing to regress");
  }
  backbone().check_image(image);
  return predict_from_features(backbone().features(image, prompt));
}

PositionModel::PositionModel(const ModelConfig& config, ToyBackbone backbone)
    : config_(config), backbone_(std::move(backbone)) {}

PositionModel::PositionModel(const ModelConfig& config)
    : config_(config), backbone_(config.backbone) {
  const int d = backbone_.feature_dim();
  Rng rng(derive_seed(config.seed, 0xF05));
  const Matrix fusion = Matrix::Identity(d, d) + uniform_matrix(rng, d, d, config.fusion_mixing * std::sqrt(3.0 / d));
  fusion_ = quantize_linear(fusion, config.quant_block);
  fusion_weight_ = dequantize(fusion_);
  fusion_bias_ = uniform_vector(rng, d, 0.1).array() + config.fusion_shift;
  adapter_ = make_lora(d, d, config.lora_rank, config.lora_alpha, derive_seed(config.seed, 0x10A));
  head_ = make_head(d, config.hidden, derive_seed(config.seed, 0x4EAD));
}

PositionModel PositionModel::assemble(const ModelConfig& config, ToyBackbone backbone,
                                      QuantizedLinear fusion, Vector fusion_bias,
                                      LoRAAdapter adapter, RegressionHead head) {
  const int d = backbone.feature_dim();
  if (fusion.rows != d || fusion.cols != d || fusion_bias.size() != d || adapter.A.cols() != d ||
      adapter.B.rows() != d || adapter.B.cols() != adapter.A.rows() || head.W1.cols() != d ||
      head.W2.rows() != 3 || head.W2.cols() != head.W1.rows()) {
    fail(ErrorCode::DimensionMismatch, "model components have inconsistent shapes");
  }
  PositionModel m(config, std::move(backbone));
  m.fusion_ = std::move(fusion);
  m.fusion_weight_ = dequantize(m.fusion_);
  m.fusion_bias_ = std::move(fusion_bias);
  m.adapter_ = std::move(adapter);
  m.head_ = std::move(head);
  return m;
}

Vector PositionModel::base_features(const Vector& f) const {
  if (f.size() != fusion_weight_.cols()) fail(ErrorCode::DimensionMismatch, "feature size mismatch");
  return (fusion_weight_ * f + fusion_bias_).cwiseMax(0.0);
}

Vector PositionModel::adapted_features(const Vector& f) const {
  if (f.size() != fusion_weight_.cols()) fail(ErrorCode::DimensionMismatch, "feature size mismatch");
  return (lora_forward(fusion_weight_, adapter_, f) + fusion_bias_).cwiseMax(0.0);
}

Vec3 PositionModel::predict_from_features(const Vector& f) const {
  return head_.forward(adapted_features(f));
}

std::string PositionModel::general_answer(const Raster& image, std::string_view prompt) const {
  const auto decision = route(prompt);
  if (decision.path != RoutePath::GeneralPath) {
    fail(ErrorCode::RoutingViolation, "prompt routes to the regression path, not the base model");
  }
  backbone_.check_image(image);
  return "The image is predominantly " + backbone_.dominant_color(image) + ".";
}

ParameterSet PositionModel::trainable_parameters() const {
  auto info = [](std::string name, const Matrix& m) {
    return ParameterInfo{std::move(name), static_cast<int>(m.rows()), static_cast<int>(m.cols())};
  };
  auto vinfo = [](std::string name, const Vector& v) {
    return ParameterInfo{std::move(name), static_cast<int>(v.size()), 1};
  };
  return ParameterSet{{info("lora.A", adapter_.A), info("lora.B", adapter_.B), info("head.W1", head_.W1),
                       vinfo("head.b1", head_.b1), info("head.W2", head_.W2), vinfo("head.b2", head_.b2)}};
}

namespace {

std::uint64_t hash_backbone(const ToyBackbone& b, std::uint64_t h) {
  const auto& c = b.config();
  const std::int64_t dims[6] = {c.image_width, c.image_height, c.hue_channels,
                                c.text_dim,    c.numeric_dim,  c.text_buckets};
  h = fnv1a(dims, sizeof dims, h);
  const double levels[4] = {c.hue_sharpness, c.chroma_gate, c.bright_level, c.dark_level};
  h = fnv1a(levels, sizeof levels, h);
  h = fnv1a(&c.seed, sizeof c.seed, h);
  const auto& w = b.weights();
  h = hash_matrix(w.opponent, h);
  h = hash_matrix(w.hue_filters, h);
  return hash_matrix(w.numeric_embedding, h);
}

}  // namespace

std::uint64_t PositionModel::frozen_hash() const {
  std::uint64_t h = hash_backbone(backbone_, 0xcbf29ce484222325ULL);
  const std::int64_t dims[3] = {fusion_.rows, fusion_.cols, fusion_.block_size};
  h = fnv1a(dims, sizeof dims, h);
  h = fnv1a(fusion_.codes.data(), fusion_.codes.size(), h);
  h = fnv1a(fusion_.scales.data(), fusion_.scales.size() * sizeof(double), h);
  h = fnv1a(fusion_.absmax.data(), fusion_.absmax.size() * sizeof(double), h);
  return hash_vector(fusion_bias_, h);
}

std::uint64_t PositionModel::trainable_hash() const {
  std::uint64_t h = hash_matrix(adapter_.A, 0xcbf29ce484222325ULL);
  h = hash_matrix(adapter_.B, h);
  h = fnv1a(&adapter_.alpha, sizeof adapter_.alpha, h);
  h = hash_matrix(head_.W1, h);
  h = hash_vector(head_.b1, h);
  h = hash_matrix(head_.W2, h);
  return hash_vector(head_.b2, h);
}

LinearProbe::LinearProbe(const BackboneConfig& config)
    : backbone_(config),
      weight_(Matrix::Zero(3, config.feature_dim())),
      bias_(Vector::Zero(3)),
      norm_(identity_normalization(config.feature_dim())) {}

LinearProbe::LinearProbe(ToyBackbone backbone, Matrix weight, Vector bias, Normalization norm)
    : backbone_(std::move(backbone)), weight_(std::move(weight)), bias_(std::move(bias)), norm_(std::move(norm)) {
  const int d = backbone_.feature_dim();
  if (weight_.rows() != 3 || weight_.cols() != d || bias_.size() != 3 || norm_.input_mean.size() != d) {
    fail(ErrorCode::DimensionMismatch, "linear probe components have inconsistent shapes");
  }
}

Vec3 LinearProbe::predict_from_features(const Vector& f) const {
  if (f.size() != weight_.cols()) fail(ErrorCode::DimensionMismatch, "feature size mismatch");
  const Vector x = (f - norm_.input_mean).cwiseProduct(norm_.input_inv_std);
  const Vector o = weight_ * x + bias_;
  return norm_.output_offset + norm_.output_scale.cwiseProduct(o);
}

ParameterSet LinearProbe::trainable_parameters() const {
  return ParameterSet{{ParameterInfo{"probe.W", 3, static_cast<int>(weight_.cols())},
                       ParameterInfo{"probe.b", 3, 1}}};
}

std::uint64_t LinearProbe::frozen_hash() const {
  return hash_backbone(backbone_, 0xcbf29ce484222325ULL);
}

}  // namespace wristloc::model
