#pragma once

#include "wristloc/geometry.hpp"
#include "wristloc/image.hpp"
#include "wristloc/routing.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wristloc::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// 4-bit blockwise quantization
// ---------------------------------------------------------------------------

/// Symmetric signed 4-bit absmax quantization over row-major blocks of
/// block_size weights: scale = max|w| / 7, code = round_half_even(w / scale)
/// clamped to [-7, 7]. An all-zero block has scale 0 and zero codes.
///
/// The block absmax is kept next to the scale. Dequantization evaluates
/// (code / 7) * absmax, which equals code * scale in exact arithmetic but
/// reproduces +-absmax bit-exactly; (absmax / 7) * 7 does not round-trip for
/// about 8% of doubles.
struct QuantizedLinear {
  int rows = 0;
  int cols = 0;
  int block_size = 64;
  std::vector<std::int8_t> codes;  // row-major, one per weight
  std::vector<double> scales;      // one per block, absmax / 7
  std::vector<double> absmax;      // one per block

  std::size_t block_of(std::size_t flat_index) const { return flat_index / block_size; }
};

QuantizedLinear quantize_linear(const Matrix& weights, int block_size = 64);
Matrix dequantize(const QuantizedLinear& q);

// ---------------------------------------------------------------------------
// LoRA
// ---------------------------------------------------------------------------

struct LoRAAdapter {
  Matrix A;  // rank x d_in
  Matrix B;  // d_out x rank
  double alpha = 16.0;

  int rank() const { return static_cast<int>(A.rows()); }
  double scale() const { return alpha / rank(); }
  std::size_t parameter_count() const { return A.size() + B.size(); }
};

/// A ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), B = 0. Requires 1 <= rank <= min(d_in, d_out).
LoRAAdapter make_lora(int d_in, int d_out, int rank, double alpha, std::uint64_t seed);

/// y = dequantize(base) x + (alpha / r) B (A x). Throws DimensionMismatch.
Vector lora_forward(const QuantizedLinear& base, const LoRAAdapter& adapter, const Vector& x);
Vector lora_forward(const Matrix& base_weight, const LoRAAdapter& adapter, const Vector& x);

// ---------------------------------------------------------------------------
// Frozen toy backbone
// ---------------------------------------------------------------------------

struct BackboneConfig {
  int image_width = 64;
  int image_height = 64;
  int hue_channels = 12;
  double hue_sharpness = 8.0;  // exponent of the cosine hue tuning
  double chroma_gate = 0.4;    // hue channels need chroma > gate * luminance
  double bright_level = 1.3;   // luminance, relative to the image mean
  double dark_level = 0.5;
  int text_dim = 181;     // word block + numeric block
  int numeric_dim = 16;   // trailing dims reserved for numbers
  int text_buckets = 509;
  std::uint64_t seed = 0x5EEDBA5EULL;

  int image_channels() const { return hue_channels + 3; }
  int image_feature_dim() const { return 5 * image_channels(); }
  int word_dim() const { return text_dim - numeric_dim; }
  int feature_dim() const { return image_feature_dim() + text_dim; }
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

/// Stand-in for a pretrained vision-language encoder.
///
/// Image side: the image is divided by its per-channel mean (removing global
/// lighting and table color), then two 1x1 convolutions map it to luminance
/// and opponent chroma (a = R - G, b = B - (R + G) / 2) and on to
/// hue-tuned channels, rectified and sharpened by a power. Bright, dark and
/// saliency maps complete the stack. Every map is read out as its mass,
/// centroid (u, v in [-1, 1]) and spread.
///
/// Prompt side: a hashed bag of tokens. Words add a signed one-hot in
/// hashed buckets of the word block. Numbers add value/100 times a row of
/// the numeric embedding, keyed by the preceding word and the number's
/// ordinal after it.
///
/// Weights are generated from the config and never change after construction.
class ToyBackbone {
 public:
  explicit ToyBackbone(const BackboneConfig& config = {});

  const BackboneConfig& config() const noexcept { return config_; }
  int feature_dim() const { return config_.feature_dim(); }

  Vector features(const Raster& image, std::string_view prompt) const;
  Vector image_features(const Raster& image) const;
  Vector text_features(std::string_view prompt) const;

  /// "red", "green" or "blue", whichever channel mean is largest.
  std::string dominant_color(const Raster& image) const;

  void check_image(const Raster& image) const;

  // Serialized weights, in checkpoint order.
  struct Weights {
    Matrix opponent;           // 3 x 3, rows L, a, b
    Matrix hue_filters;        // hue_channels x 2, (cos, sin) of the preferred hue
    Matrix numeric_embedding;  // buckets x numeric_dim
  };
  const Weights& weights() const noexcept { return weights_; }
  static ToyBackbone from_weights(const BackboneConfig& config, Weights weights);

 private:
  BackboneConfig config_;
  Weights weights_;
};

// ---------------------------------------------------------------------------
// Regression head and models
// ---------------------------------------------------------------------------

/// Fixed affine maps around the trainable layers. Input features are
/// standardized, outputs are de-standardized into millimeters. They are set
/// once from training data and are not touched by gradient steps.
struct Normalization {
  Vector input_mean;
  Vector input_inv_std;
  Vector output_offset;  // 3
  Vector output_scale;   // 3
};

Normalization identity_normalization(int input_dim);

/// Two-layer perceptron d -> hidden -> 3 with ReLU.
struct RegressionHead {
  Matrix W1;
  Vector b1;
  Matrix W2;
  Vector b2;
  Normalization norm;

  std::size_t parameter_count() const { return W1.size() + b1.size() + W2.size() + b2.size(); }
  Vec3 forward(const Vector& features) const;
};

RegressionHead make_head(int input_dim, int hidden, std::uint64_t seed);

struct ModelConfig {
  BackboneConfig backbone;
  double fusion_mixing = 0.3;  // random part of the fusion weight, relative to identity
  double fusion_shift = 2.0;   // fusion bias centre
  int lora_rank = 8;
  double lora_alpha = 16.0;
  int hidden = 128;
  int quant_block = 64;
  std::uint64_t seed = 1;
};

struct ParameterInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
};

struct ParameterSet {
  std::vector<ParameterInfo> tensors;
  std::size_t total() const;
  bool contains(std::string_view name) const;
};

/// Shared interface of the adapted model and the linear baseline.
class PositionRegressor {
 public:
  virtual ~PositionRegressor() = default;
  virtual const ToyBackbone& backbone() const = 0;
  /// Prediction from precomputed backbone features.
  virtual Vec3 predict_from_features(const Vector& backbone_features) const = 0;
  /// Routes the prompt, runs the backbone and predicts. Throws
  /// RoutingViolation for general prompts, DimensionMismatch for images of
  /// the wrong size.
  Vec3 predict_position(const Raster& image, std::string_view prompt) const;
  virtual ParameterSet trainable_parameters() const = 0;
  /// FNV-1a over every frozen byte (backbone weights, quantized codes and
  /// scales, frozen biases).
  virtual std::uint64_t frozen_hash() const = 0;
};

/// Frozen backbone -> frozen 4-bit fusion projection (+ LoRA) -> ReLU ->
/// regression head. The fusion weight is the identity plus uniform mixing, so
/// pretrained features pass through largely intact.
class PositionModel final : public PositionRegressor {
 public:
  explicit PositionModel(const ModelConfig& config = {});

  const ToyBackbone& backbone() const override { return backbone_; }
  const ModelConfig& config() const { return config_; }

  /// ReLU(dequantized fusion * f + bias), no adapter.
  Vector base_features(const Vector& backbone_features) const;
  /// ReLU(dequantized fusion * f + bias + (alpha/r) B A f).
  Vector adapted_features(const Vector& backbone_features) const;

  Vec3 predict_from_features(const Vector& backbone_features) const override;

  /// Answers a general prompt using only frozen components.
  std::string general_answer(const Raster& image, std::string_view prompt) const;

  ParameterSet trainable_parameters() const override;
  std::uint64_t frozen_hash() const override;
  /// FNV-1a over the adapter and head parameters.
  std::uint64_t trainable_hash() const;

  const QuantizedLinear& fusion() const { return fusion_; }
  const Matrix& fusion_weight() const { return fusion_weight_; }
  const Vector& fusion_bias() const { return fusion_bias_; }
  LoRAAdapter& adapter() { return adapter_; }
  const LoRAAdapter& adapter() const { return adapter_; }
  RegressionHead& head() { return head_; }
  const RegressionHead& head() const { return head_; }

  static PositionModel assemble(const ModelConfig& config, ToyBackbone backbone,
                                QuantizedLinear fusion, Vector fusion_bias, LoRAAdapter adapter,
                                RegressionHead head);

 private:
  PositionModel(const ModelConfig& config, ToyBackbone backbone);

  ModelConfig config_;
  ToyBackbone backbone_;
  QuantizedLinear fusion_;
  Matrix fusion_weight_;  // dequantized cache of fusion_
  Vector fusion_bias_;
  LoRAAdapter adapter_;
  RegressionHead head_;
};

/// Baseline: a single linear layer d -> 3 on frozen backbone features.
class LinearProbe final : public PositionRegressor {
 public:
  explicit LinearProbe(const BackboneConfig& config = {});
  LinearProbe(ToyBackbone backbone, Matrix weight, Vector bias, Normalization norm);

  const ToyBackbone& backbone() const override { return backbone_; }
  Vec3 predict_from_features(const Vector& backbone_features) const override;
  ParameterSet trainable_parameters() const override;
  std::uint64_t frozen_hash() const override;

  Matrix& weight() { return weight_; }
  const Matrix& weight() const { return weight_; }
  Vector& bias() { return bias_; }
  const Vector& bias() const { return bias_; }
  Normalization& norm() { return norm_; }
  const Normalization& norm() const { return norm_; }

 private:
  ToyBackbone backbone_;
  Matrix weight_;  // 3 x d
  Vector bias_;    // 3
  Normalization norm_;
};

// FNV-1a helpers shared by the hash functions.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_matrix(const Matrix& m, std::uint64_t h);

}  // namespace wristloc::model
