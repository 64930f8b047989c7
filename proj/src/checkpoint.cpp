#include "wristloc/checkpoint.hpp"

#include "wristloc/dataset.hpp"
#include "wristloc/errors.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace wristloc::model {

namespace {

constexpr std::array<char, 4> kMagic = {'W', 'L', 'C', 'K'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u16(std::uint16_t v) { uint(v, 2); }
  void u32(std::uint32_t v) { uint(v, 4); }
  void i32(int v) { uint(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { uint(v, 8); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v), 8); }

  void tensor(const std::string& name, const Matrix& m) {
    header(name, 0, m.rows(), m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void tensor(const std::string& name, const Vector& v) { tensor(name, Matrix(v)); }
  void tensor(const std::string& name, const std::vector<double>& v) {
    tensor(name, Matrix(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()))));
  }
  void codes(const std::string& name, const QuantizedLinear& q) {
    header(name, 1, q.rows, q.cols);
    for (auto c : q.codes) u8(static_cast<std::uint8_t>(c));
  }

 private:
  void uint(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void header(const std::string& name, std::uint8_t dtype, Eigen::Index rows, Eigen::Index cols) {
    u16(static_cast<std::uint16_t>(name.size()));
    out_.write(name.data(), static_cast<std::streamsize>(name.size()));
    u8(dtype);
    u32(static_cast<std::uint32_t>(rows));
    u32(static_cast<std::uint32_t>(cols));
  }

  std::ostream& out_;
};

struct Tensor {
  std::uint8_t dtype = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> values;       // dtype 0
  std::vector<std::int8_t> codes;   // dtype 1
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  int i32() { return static_cast<int>(static_cast<std::int32_t>(u32())); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(uint(8)); }

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) truncated();
  }

  std::map<std::string, Tensor> tensors() {
    std::map<std::string, Tensor> out;
    const auto count = u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name(u16(), '\0');
      bytes(name.data(), name.size());
      Tensor t;
      t.dtype = u8();
      t.rows = u32();
      t.cols = u32();
      const std::uint64_t n = static_cast<std::uint64_t>(t.rows) * t.cols;
      if (n > (std::uint64_t{1} << 28)) fail(ErrorCode::CheckpointError, "tensor " + name + " is implausibly large");
      if (t.dtype == 0) {
        t.values.resize(n);
        for (auto& v : t.values) v = f64();
      } else if (t.dtype == 1) {
        t.codes.resize(n);
        for (auto& c : t.codes) c = static_cast<std::int8_t>(u8());
      } else {
        fail(ErrorCode::CheckpointError, "tensor " + name + " has unknown dtype " + std::to_string(t.dtype));
      }
      if (!out.emplace(name, std::move(t)).second) {
        fail(ErrorCode::CheckpointError, "duplicate tensor " + name);
      }
    }
    return out;
  }

 private:
  [[noreturn]] static void truncated() { fail(ErrorCode::CheckpointError, "checkpoint is truncated"); }

  std::uint64_t uint(int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) truncated();
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }

  std::istream& in_;
};

void write_header(Writer& w, CheckpointKind kind, const BackboneConfig& b) {
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(data::kPromptTemplateVersion));
  w.u8(static_cast<std::uint8_t>(kind));
  w.i32(b.image_width);
  w.i32(b.image_height);
  w.i32(b.hue_channels);
  w.i32(b.text_dim);
  w.i32(b.numeric_dim);
  w.i32(b.text_buckets);
  w.f64(b.hue_sharpness);
  w.f64(b.chroma_gate);
  w.f64(b.bright_level);
  w.f64(b.dark_level);
  w.u64(b.seed);
}

CheckpointKind read_kind(Reader& r) {
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) fail(ErrorCode::CheckpointError, "not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionError, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto prompt_version = r.u32();
  if (prompt_version != static_cast<std::uint32_t>(data::kPromptTemplateVersion)) {
    fail(ErrorCode::VersionError, "checkpoint was trained with prompt template version " +
                                      std::to_string(prompt_version) + ", this build uses " +
                                      std::to_string(data::kPromptTemplateVersion));
  }
  const auto kind = r.u8();
  if (kind != 1 && kind != 2) fail(ErrorCode::CheckpointError, "unknown checkpoint kind " + std::to_string(kind));
  return static_cast<CheckpointKind>(kind);
}

BackboneConfig read_backbone_config(Reader& r) {
  BackboneConfig b;
  b.image_width = r.i32();
  b.image_height = r.i32();
  b.hue_channels = r.i32();
  b.text_dim = r.i32();
  b.numeric_dim = r.i32();
  b.text_buckets = r.i32();
  b.hue_sharpness = r.f64();
  b.chroma_gate = r.f64();
  b.bright_level = r.f64();
  b.dark_level = r.f64();
  b.seed = r.u64();
  return b;
}

void write_backbone(Writer& w, const ToyBackbone& b) {
  const auto& wt = b.weights();
  w.tensor("backbone.opponent", wt.opponent);
  w.tensor("backbone.hue_filters", wt.hue_filters);
  w.tensor("backbone.numeric_embedding", wt.numeric_embedding);
}

void write_norm(Writer& w, const Normalization& n) {
  w.tensor("norm.input_mean", n.input_mean);
  w.tensor("norm.input_inv_std", n.input_inv_std);
  w.tensor("norm.output_offset", n.output_offset);
  w.tensor("norm.output_scale", n.output_scale);
}

const Tensor& find(const std::map<std::string, Tensor>& ts, const std::string& name, std::uint8_t dtype) {
  const auto it = ts.find(name);
  if (it == ts.end()) fail(ErrorCode::CheckpointError, "missing tensor " + name);
  if (it->second.dtype != dtype) fail(ErrorCode::CheckpointError, "tensor " + name + " has the wrong dtype");
  return it->second;
}

Matrix matrix(const std::map<std::string, Tensor>& ts, const std::string& name) {
  const auto& t = find(ts, name, 0);
  Matrix m(t.rows, t.cols);
  for (std::uint32_t r = 0; r < t.rows; ++r) {
    for (std::uint32_t c = 0; c < t.cols; ++c) m(r, c) = t.values[static_cast<std::size_t>(r) * t.cols + c];
  }
  return m;
}

Vector vector(const std::map<std::string, Tensor>& ts, const std::string& name) {
  const auto& t = find(ts, name, 0);
  if (t.cols != 1) fail(ErrorCode::CheckpointError, "tensor " + name + " must be a column");
  return Eigen::Map<const Vector>(t.values.data(), t.rows);
}

std::vector<double> values(const std::map<std::string, Tensor>& ts, const std::string& name) {
  return find(ts, name, 0).values;
}

ToyBackbone read_backbone(const BackboneConfig& config, const std::map<std::string, Tensor>& ts) {
  ToyBackbone::Weights w;
  w.opponent = matrix(ts, "backbone.opponent");
  w.hue_filters = matrix(ts, "backbone.hue_filters");
  w.numeric_embedding = matrix(ts, "backbone.numeric_embedding");
  return ToyBackbone::from_weights(config, std::move(w));
}

Normalization read_norm(const std::map<std::string, Tensor>& ts, int d) {
  Normalization n;
  n.input_mean = vector(ts, "norm.input_mean");
  n.input_inv_std = vector(ts, "norm.input_inv_std");
  n.output_offset = vector(ts, "norm.output_offset");
  n.output_scale = vector(ts, "norm.output_scale");
  if (n.input_mean.size() != d || n.input_inv_std.size() != d || n.output_offset.size() != 3 ||
      n.output_scale.size() != 3) {
    fail(ErrorCode::CheckpointError, "normalization tensors have the wrong size");
  }
  return n;
}

// Rewrites shape errors from the model constructors as checkpoint errors.
template <typename F>
auto as_checkpoint_error(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DimensionMismatch || e.code() == ErrorCode::InvalidArgument) {
      fail(ErrorCode::CheckpointError, std::string("inconsistent checkpoint: ") + e.what());
    }
    throw;
  }
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOFailure, "cannot open " + path.string());
  return in;
}

template <typename M>
void save(const std::filesystem::path& path, const M& m) {
  std::ostringstream buf(std::ios::binary);
  write_checkpoint(buf, m);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IOFailure, "cannot write " + path.string());
  const auto bytes = buf.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IOFailure, "failed writing " + path.string());
}

}  // namespace

void write_checkpoint(std::ostream& out, const PositionModel& m) {
  Writer w(out);
  write_header(w, CheckpointKind::Position, m.backbone().config());
  const auto& c = m.config();
  w.i32(c.lora_rank);
  w.i32(c.hidden);
  w.i32(c.quant_block);
  w.f64(c.lora_alpha);
  w.f64(c.fusion_mixing);
  w.f64(c.fusion_shift);
  w.u64(c.seed);
  w.u32(17);
  write_backbone(w, m.backbone());
  w.codes("fusion.codes", m.fusion());
  w.tensor("fusion.scales", m.fusion().scales);
  w.tensor("fusion.absmax", m.fusion().absmax);
  w.tensor("fusion.bias", m.fusion_bias());
  w.tensor("lora.A", m.adapter().A);
  w.tensor("lora.B", m.adapter().B);
  w.tensor("head.W1", m.head().W1);
  w.tensor("head.b1", m.head().b1);
  w.tensor("head.W2", m.head().W2);
  w.tensor("head.b2", m.head().b2);
  write_norm(w, m.head().norm);
}

void write_checkpoint(std::ostream& out, const LinearProbe& m) {
  Writer w(out);
  write_header(w, CheckpointKind::LinearProbe, m.backbone().config());
  w.u32(9);
  write_backbone(w, m.backbone());
  w.tensor("probe.W", m.weight());
  w.tensor("probe.b", m.bias());
  write_norm(w, m.norm());
}

void save_checkpoint(const std::filesystem::path& path, const PositionModel& m) { save(path, m); }
void save_checkpoint(const std::filesystem::path& path, const LinearProbe& m) { save(path, m); }

PositionModel read_position_model(std::istream& in) {
  Reader r(in);
  if (read_kind(r) != CheckpointKind::Position) {
    fail(ErrorCode::CheckpointError, "checkpoint holds a linear probe, not an adapted model");
  }
  ModelConfig c;
  c.backbone = read_backbone_config(r);
  c.lora_rank = r.i32();
  c.hidden = r.i32();
  c.quant_block = r.i32();
  c.lora_alpha = r.f64();
  c.fusion_mixing = r.f64();
  c.fusion_shift = r.f64();
  c.seed = r.u64();
  const auto ts = r.tensors();
  return as_checkpoint_error([&] {
    ToyBackbone backbone = read_backbone(c.backbone, ts);
    const int d = backbone.feature_dim();
    QuantizedLinear q;
    const auto& codes = find(ts, "fusion.codes", 1);
    q.rows = static_cast<int>(codes.rows);
    q.cols = static_cast<int>(codes.cols);
    q.block_size = c.quant_block;
    q.codes = codes.codes;
    for (auto code : q.codes) {
      if (code < -7 || code > 7) fail(ErrorCode::CheckpointError, "fusion code outside [-7, 7]");
    }
    q.scales = values(ts, "fusion.scales");
    q.absmax = values(ts, "fusion.absmax");
    const std::size_t blocks = (q.codes.size() + q.block_size - 1) / std::max(q.block_size, 1);
    if (q.block_size < 1 || q.scales.size() != blocks || q.absmax.size() != blocks) {
      fail(ErrorCode::CheckpointError, "fusion scales do not match the block layout");
    }
    LoRAAdapter adapter{matrix(ts, "lora.A"), matrix(ts, "lora.B"), c.lora_alpha};
    RegressionHead head{matrix(ts, "head.W1"), vector(ts, "head.b1"), matrix(ts, "head.W2"),
                        vector(ts, "head.b2"), read_norm(ts, d)};
    return PositionModel::assemble(c, std::move(backbone), std::move(q), vector(ts, "fusion.bias"),
                                   std::move(adapter), std::move(head));
  });
}

LinearProbe read_linear_probe(std::istream& in) {
  Reader r(in);
  if (read_kind(r) != CheckpointKind::LinearProbe) {
    fail(ErrorCode::CheckpointError, "checkpoint holds an adapted model, not a linear probe");
  }
  const BackboneConfig config = read_backbone_config(r);
  const auto ts = r.tensors();
  return as_checkpoint_error([&] {
    ToyBackbone backbone = read_backbone(config, ts);
    const int d = backbone.feature_dim();
    return LinearProbe(std::move(backbone), matrix(ts, "probe.W"), vector(ts, "probe.b"), read_norm(ts, d));
  });
}

CheckpointKind checkpoint_kind(const std::filesystem::path& path) {
  auto in = open_in(path);
  Reader r(in);
  return read_kind(r);
}

PositionModel load_position_model(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_position_model(in);
}

LinearProbe load_linear_probe(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_linear_probe(in);
}

std::unique_ptr<PositionRegressor> load_regressor(const std::filesystem::path& path) {
  if (checkpoint_kind(path) == CheckpointKind::Position) {
    return std::make_unique<PositionModel>(load_position_model(path));
  }
  return std::make_unique<LinearProbe>(load_linear_probe(path));
}

}  // namespace wristloc::model
