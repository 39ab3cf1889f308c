#include "cgmmd/generator.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "cgmmd/errors.hpp"
#include "cgmmd/random.hpp"

namespace cgmmd {

std::string_view to_string(OutputActivation act) noexcept {
  return act == OutputActivation::linear ? "linear" : "sigmoid";
}

OutputActivation output_activation_from_string(std::string_view name) {
  if (name == "linear") {
    return OutputActivation::linear;
  }
  if (name == "sigmoid") {
    return OutputActivation::sigmoid;
  }
  throw std::invalid_argument("unknown output activation '" + std::string(name) + "'");
}

void GeneratorConfig::validate() const {
  if (predictor_dim == 0 || noise_dim == 0 || response_dim == 0) {
    throw std::invalid_argument("generator dims d, m, p must all be >= 1");
  }
  if (hidden.empty()) {
    throw std::invalid_argument("generator needs at least one hidden layer");
  }
  for (std::size_t w : hidden) {
    if (w == 0) {
      throw std::invalid_argument("hidden layer widths must be >= 1");
    }
  }
}

std::vector<std::size_t> GeneratorConfig::layer_widths() const {
  std::vector<std::size_t> widths{predictor_dim + noise_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(response_dim);
  return widths;
}

ParameterSet zeros_like(const ParameterSet& params) {
  ParameterSet out;
  out.reserve(params.size());
  for (const auto& layer : params) {
    out.push_back({Matrix(layer.weight.rows(), layer.weight.cols()), std::vector<double>(layer.bias.size())});
  }
  return out;
}

std::size_t GeneratorNet::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& layer : layers) {
    total += layer.weight.size() + layer.bias.size();
  }
  return total;
}

GeneratorNet init_generator(const GeneratorConfig& config) {
  config.validate();
  const auto widths = config.layer_widths();
  GeneratorNet net{config, {}};
  Rng rng(config.seed);
  for (std::size_t l = 1; l < widths.size(); ++l) {
    const std::size_t fan_in = widths[l - 1];
    const std::size_t fan_out = widths[l];
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& w : layer.weight.data()) {
      w = scale * rng.normal();
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix sample_noise(const NoiseSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.dim == 0) {
    throw std::invalid_argument("noise dimension must be >= 1");
  }
  Matrix out(n, spec.dim);
  Rng rng(seed);
  for (double& v : out.data()) {
    v = rng.normal();
  }
  return out;
}

Matrix concat_columns(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw std::invalid_argument("concat_columns: row counts differ");
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t i = 0; i < left.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(left.row(i).begin(), left.row(i).end(), dst.begin());
    std::copy(right.row(i).begin(), right.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(left.cols()));
  }
  return out;
}

Matrix generate(const GeneratorNet& net, const Matrix& eta, const Matrix& x) {
  const auto& cfg = net.config;
  if (eta.cols() != cfg.noise_dim || x.cols() != cfg.predictor_dim || eta.rows() != x.rows()) {
    throw std::invalid_argument("generate: expected eta n×" + std::to_string(cfg.noise_dim) + " and x n×" +
                                std::to_string(cfg.predictor_dim));
  }
  Matrix act = concat_columns(eta, x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    const bool last = l + 1 == net.layers.size();
    Matrix next(act.rows(), layer.weight.cols());
    for (std::size_t i = 0; i < act.rows(); ++i) {
      for (std::size_t o = 0; o < layer.weight.cols(); ++o) {
        double sum = 0.0;
        for (std::size_t in = 0; in < layer.weight.rows(); ++in) {
          sum += act(i, in) * layer.weight(in, o);
        }
        sum += layer.bias[o];
        if (!last) {
          sum = sum > 0.0 ? sum : 0.0;
        } else if (cfg.output_activation == OutputActivation::sigmoid) {
          sum = 1.0 / (1.0 + std::exp(-sum));
        }
        next(i, o) = sum;
      }
    }
    act = std::move(next);
  }
  if (!act.all_finite()) {
    throw NonFiniteError("generate: non-finite generator output");
  }
  return act;
}

// ---------------------------------------------------------------------------
// Checkpoint format (version 1). All integers and doubles are little-endian;
// doubles are IEEE-754 binary64.
//
//   magic      8 bytes  "CGMMDNET"
//   version    u32      1
//   byte order u32      0x01020304
//   d, m, p    u64 x3
//   activation u32      0 = linear, 1 = sigmoid
//   seed       u64
//   n_hidden   u64, then n_hidden u64 widths
//   n_layers   u64, then per layer:
//                rows u64, cols u64, rows*cols f64 weights (row-major, fan_in × fan_out),
//                bias_len u64, bias_len f64
//   checksum   u64      FNV-1a 64 of every preceding byte

namespace {

constexpr char kMagic[8] = {'C', 'G', 'M', 'M', 'D', 'N', 'E', 'T'};
constexpr std::uint32_t kByteOrderMark = 0x01020304;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    std::uint64_t bits = 0;
    if constexpr (std::is_same_v<T, double>) {
      bits = std::bit_cast<std::uint64_t>(value);
    } else {
      bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  void put_raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    if constexpr (std::is_same_v<T, double>) {
      return std::bit_cast<double>(bits);
    } else {
      return static_cast<T>(bits);
    }
  }

  /// Element count that must fit in the remaining payload at elem_size bytes each.
  std::size_t get_count(std::size_t elem_size) {
    const auto count = get<std::uint64_t>();
    if (elem_size != 0 && count > (bytes_.size() - pos_) / elem_size) {
      throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint corrupt: declared size exceeds payload");
    }
    return static_cast<std::size_t>(count);
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::corrupt, "checkpoint corrupt: truncated payload");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string fingerprint(std::span<const std::uint8_t> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  const std::uint64_t h = fnv1a(bytes);
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) {
    out[15 - i] = kHex[(h >> (4 * i)) & 0xf];
  }
  return out;
}

std::vector<std::uint8_t> save_checkpoint(const GeneratorNet& net) {
  const auto& cfg = net.config;
  Writer w;
  w.put_raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(kByteOrderMark);
  w.put<std::uint64_t>(cfg.predictor_dim);
  w.put<std::uint64_t>(cfg.noise_dim);
  w.put<std::uint64_t>(cfg.response_dim);
  w.put<std::uint32_t>(cfg.output_activation == OutputActivation::linear ? 0 : 1);
  w.put<std::uint64_t>(cfg.seed);
  w.put<std::uint64_t>(cfg.hidden.size());
  for (std::size_t width : cfg.hidden) {
    w.put<std::uint64_t>(width);
  }
  w.put<std::uint64_t>(net.layers.size());
  for (const auto& layer : net.layers) {
    w.put<std::uint64_t>(layer.weight.rows());
    w.put<std::uint64_t>(layer.weight.cols());
    for (double v : layer.weight.data()) {
      w.put<double>(v);
    }
    w.put<std::uint64_t>(layer.bias.size());
    for (double v : layer.bias) {
      w.put<double>(v);
    }
  }
  w.put<std::uint64_t>(fnv1a(w.bytes()));
  return std::move(w.bytes());
}

GeneratorNet load_checkpoint(std::span<const std::uint8_t> bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: bad magic");
  }
  Reader r(bytes.subspan(sizeof(kMagic)));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version, "checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                             std::to_string(kCheckpointVersion) + ")");
  }
  if (bytes.size() < sizeof(kMagic) + 8 + 8) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: truncated payload");
  }
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes.subspan(body));
  if (tail.get<std::uint64_t>() != fnv1a(bytes.first(body))) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: checksum mismatch");
  }
  if (r.get<std::uint32_t>() != kByteOrderMark) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: bad byte-order mark");
  }

  GeneratorConfig cfg;
  cfg.predictor_dim = r.get<std::uint64_t>();
  cfg.noise_dim = r.get<std::uint64_t>();
  cfg.response_dim = r.get<std::uint64_t>();
  const auto act = r.get<std::uint32_t>();
  if (act > 1) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: unknown output activation");
  }
  cfg.output_activation = act == 0 ? OutputActivation::linear : OutputActivation::sigmoid;
  cfg.seed = r.get<std::uint64_t>();
  cfg.hidden.resize(r.get_count(8));
  for (auto& width : cfg.hidden) {
    width = r.get<std::uint64_t>();
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::corrupt, std::string("checkpoint corrupt: ") + e.what());
  }

  const auto widths = cfg.layer_widths();
  GeneratorNet net{cfg, {}};
  const std::size_t n_layers = r.get_count(24);
  if (n_layers != widths.size() - 1) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: layer count does not match config");
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t rows = r.get<std::uint64_t>();
    const std::size_t cols = r.get<std::uint64_t>();
    if (rows != widths[l] || cols != widths[l + 1]) {
      throw CheckpointError(Kind::corrupt, "checkpoint corrupt: layer " + std::to_string(l) + " shape mismatch");
    }
    DenseLayer layer{Matrix(rows, cols), {}};
    for (double& v : layer.weight.data()) {
      v = r.get<double>();
    }
    layer.bias.resize(r.get_count(8));
    if (layer.bias.size() != cols) {
      throw CheckpointError(Kind::corrupt, "checkpoint corrupt: layer " + std::to_string(l) + " bias length mismatch");
    }
    for (double& v : layer.bias) {
      v = r.get<double>();
    }
    net.layers.push_back(std::move(layer));
  }
  if (sizeof(kMagic) + r.position() != body) {
    throw CheckpointError(Kind::corrupt, "checkpoint corrupt: trailing bytes");
  }
  return net;
}

void write_checkpoint_file(const GeneratorNet& net, const std::filesystem::path& path) {
  const auto bytes = save_checkpoint(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GeneratorNet read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_checkpoint(bytes);
}

}  // namespace cgmmd
