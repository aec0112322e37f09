#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmvr/core.hpp"
#include "tmvr/random.hpp"

namespace tmvr {

enum class Activation { Tanh };

// Identity feeds raw inputs to the network; Circle maps an angle x to
// (sin x, cos x) so the model is continuous across -pi ~ pi.
enum class InputFeatures : std::uint8_t { Identity = 0, Circle = 1 };

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fully connected tanh network with a linear output layer. All weights and
// biases live in one flat vector: per layer, W (out x in, row-major) then b.
class Mlp {
 public:
  using WeightMap = Eigen::Map<RowMajorMat>;
  using ConstWeightMap = Eigen::Map<const RowMajorMat>;
  using BiasMap = Eigen::Map<Vec>;
  using ConstBiasMap = Eigen::Map<const Vec>;

  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, InputFeatures features = InputFeatures::Identity)
      : sizes_(std::move(layer_sizes)), features_(features) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (auto s : sizes_)
      if (s == 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    if (features_ == InputFeatures::Circle && sizes_.front() != 2)
      throw std::invalid_argument("Mlp: circle features need a first layer of width 2");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(total);
      total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(total));
  }

  // Glorot-uniform weights, biases uniform in +-1/sqrt(fan_in). Zero biases
  // make the network odd in its input and stall training on a long plateau.
  static Mlp glorot(std::vector<std::size_t> layer_sizes, InputFeatures features, Rng& rng) {
    Mlp m(std::move(layer_sizes), features);
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(m.sizes_[l] + m.sizes_[l + 1]));
      auto W = m.weight(l);
      for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = uniform(rng, -limit, limit);
      const double b_limit = 1.0 / std::sqrt(static_cast<double>(m.sizes_[l]));
      auto b = m.bias(l);
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = uniform(rng, -b_limit, b_limit);
    }
    return m;
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  InputFeatures input_features() const { return features_; }
  Activation activation() const { return Activation::Tanh; }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t input_dim() const { return features_ == InputFeatures::Circle ? 1 : sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_parameters() const { return static_cast<std::size_t>(params_.size()); }

  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  WeightMap weight(std::size_t l) { return WeightMap(params_.data() + offsets_[l], rows(l), cols(l)); }
  ConstWeightMap weight(std::size_t l) const {
    return ConstWeightMap(params_.data() + offsets_[l], rows(l), cols(l));
  }
  BiasMap bias(std::size_t l) { return BiasMap(params_.data() + bias_offset(l), rows(l)); }
  ConstBiasMap bias(std::size_t l) const { return ConstBiasMap(params_.data() + bias_offset(l), rows(l)); }

  // Views into a vector with this model's parameter layout (e.g. a gradient).
  WeightMap weight_in(Vec& flat, std::size_t l) const {
    return WeightMap(flat.data() + offsets_[l], rows(l), cols(l));
  }
  BiasMap bias_in(Vec& flat, std::size_t l) const { return BiasMap(flat.data() + bias_offset(l), rows(l)); }

  Mat featurize(const Mat& x) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim())
      throw std::invalid_argument("Mlp: input has " + std::to_string(x.cols()) + " columns, expected " +
                                  std::to_string(input_dim()));
    if (features_ == InputFeatures::Identity) return x;
    Mat f(x.rows(), 2);
    f.col(0) = x.col(0).array().sin().matrix();
    f.col(1) = x.col(0).array().cos().matrix();
    return f;
  }

  bool operator==(const Mlp& o) const {
    return sizes_ == o.sizes_ && features_ == o.features_ && params_ == o.params_;
  }

 private:
  Eigen::Index rows(std::size_t l) const { return static_cast<Eigen::Index>(sizes_[l + 1]); }
  Eigen::Index cols(std::size_t l) const { return static_cast<Eigen::Index>(sizes_[l]); }
  std::size_t bias_offset(std::size_t l) const { return offsets_[l] + sizes_[l + 1] * sizes_[l]; }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  InputFeatures features_ = InputFeatures::Identity;
  Vec params_;
};

// Intermediate values of a forward pass; activations[0] is the featurized
// input, activations[l] the output of layer l (tanh for hidden layers).
struct MlpCache {
  Mat input;
  std::vector<Mat> activations;
};

inline Mat affine(const Mat& a, Mlp::ConstWeightMap W, Mlp::ConstBiasMap b) {
  Mat z(a.rows(), W.rows());
  z.noalias() = a * W.transpose();
  z.rowwise() += b.transpose();
  return z;
}

// tanh(z) = sign(z) (1 - e) / (1 + e) with e = exp(-2|z|); vectorizes where
// std::tanh does not.
inline Mat tanh_activation(const Mat& z) {
  const Eigen::ArrayXXd e = (-2.0 * z.array().abs()).exp();
  return (z.array().sign() * (1.0 - e) / (1.0 + e)).matrix();
}

inline Mat mlp_forward(const Mlp& m, const Mat& x, MlpCache& cache) {
  cache.input = x;
  cache.activations.clear();
  cache.activations.push_back(m.featurize(x));
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    Mat z = affine(cache.activations.back(), m.weight(l), m.bias(l));
    if (l + 1 < m.num_layers()) z = tanh_activation(z);
    cache.activations.push_back(std::move(z));
  }
  return cache.activations.back();
}

inline Mat mlp_forward(const Mlp& m, const Mat& x) {
  MlpCache cache;
  return mlp_forward(m, x, cache);
}

struct MlpGradient {
  Vec params;  // same layout as Mlp::parameters()
  Mat input;   // d<upstream, output>/d input, one row per point
};

// Reverse-mode gradient of sum_i <upstream_i, forward(x_i)>.
inline MlpGradient mlp_backward(const Mlp& m, const MlpCache& cache, const Mat& upstream) {
  if (cache.activations.size() != m.num_layers() + 1)
    throw std::invalid_argument("mlp_backward: cache does not match model");
  const Mat& out = cache.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw std::invalid_argument("mlp_backward: upstream shape does not match forward output");

  MlpGradient g;
  g.params = Vec::Zero(static_cast<Eigen::Index>(m.num_parameters()));
  Mat delta = upstream;
  for (std::size_t l = m.num_layers(); l-- > 0;) {
    const Mat& a_in = cache.activations[l];
    m.weight_in(g.params, l).noalias() = delta.transpose() * a_in;
    m.bias_in(g.params, l) = delta.colwise().sum().transpose();
    Mat prev(delta.rows(), a_in.cols());
    prev.noalias() = delta * m.weight(l);
    if (l > 0) prev.array() *= (1.0 - a_in.array().square());
    delta = std::move(prev);
  }
  if (m.input_features() == InputFeatures::Circle) {
    const auto& x = cache.input.col(0).array();
    g.input = (delta.col(0).array() * x.cos() - delta.col(1).array() * x.sin()).matrix();
  } else {
    g.input = std::move(delta);
  }
  return g;
}

// ---- checkpoints ----
// Layout (little-endian): "TIMLP1", u64 number of layer sizes, u64 sizes,
// f64 parameters (per layer W row-major then b), then one trailing byte
// with the input feature map.

inline constexpr std::array<char, 6> kCheckpointMagic = {'T', 'I', 'M', 'L', 'P', '1'};

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Mlp& m) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::write_u64(os, m.layer_sizes().size());
  for (auto s : m.layer_sizes()) detail::write_u64(os, s);
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i)
    detail::write_u64(os, std::bit_cast<std::uint64_t>(m.parameters()(i)));
  const char tag = static_cast<char>(m.input_features());
  os.write(&tag, 1);
}

inline Mlp read_checkpoint(std::istream& is) {
  std::array<char, 6> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kCheckpointMagic) throw std::runtime_error("checkpoint: bad magic");
  const std::uint64_t count = detail::read_u64(is);
  if (count < 2 || count > 64) throw std::runtime_error("checkpoint: implausible layer count");
  std::vector<std::size_t> sizes;
  for (std::uint64_t i = 0; i < count; ++i) sizes.push_back(static_cast<std::size_t>(detail::read_u64(is)));
  Vec params(0);
  {
    Mlp probe(sizes);
    params.resize(static_cast<Eigen::Index>(probe.num_parameters()));
  }
  for (Eigen::Index i = 0; i < params.size(); ++i) params(i) = std::bit_cast<double>(detail::read_u64(is));
  char tag = 0;
  is.read(&tag, 1);
  if (!is) throw std::runtime_error("checkpoint: missing feature tag");
  if (tag != 0 && tag != 1) throw std::runtime_error("checkpoint: unknown feature tag");
  Mlp m(sizes, static_cast<InputFeatures>(tag));
  m.parameters() = params;
  return m;
}

inline void save_checkpoint(const std::string& path, const Mlp& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  write_checkpoint(os, m);
}

inline Mlp load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace tmvr
