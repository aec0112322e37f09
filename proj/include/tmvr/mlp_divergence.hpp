#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tmvr/mlp.hpp"

namespace tmvr {

// Forward pass that also carries the input Jacobian: tangents[k] holds
// d output / d x_k (one row per point). Needed for losses that involve
// div v_theta, whose parameter gradients need second-order terms.
struct MlpTangentCache {
  std::vector<Mat> activations;                // a_l, l = 0..L
  std::vector<std::vector<Mat>> tangents;      // tangents[l][k] = d a_l / d x_k
  std::vector<std::vector<Mat>> pre_tangents;  // tangents[l][k] * W_l^T, hidden layers only
};

struct MlpTangentOutput {
  Mat value;                 // n x out
  std::vector<Mat> jacobian; // jacobian[k](i, c) = d out_c / d x_k at point i
  Vec divergence() const {
    Vec div = Vec::Zero(value.rows());
    for (std::size_t k = 0; k < jacobian.size(); ++k) div += jacobian[k].col(static_cast<Eigen::Index>(k));
    return div;
  }
};

inline MlpTangentOutput mlp_forward_tangent(const Mlp& m, const Mat& x, MlpTangentCache& cache) {
  if (m.input_features() != InputFeatures::Identity)
    throw std::invalid_argument("mlp_forward_tangent: only identity input features are supported");
  const std::size_t d = m.input_dim();
  if (static_cast<std::size_t>(x.cols()) != d) throw std::invalid_argument("mlp_forward_tangent: input shape");
  const Eigen::Index n = x.rows();

  cache.activations.assign(1, x);
  cache.tangents.assign(1, {});
  cache.pre_tangents.assign(1, {});
  for (std::size_t k = 0; k < d; ++k) {
    Mat e = Mat::Zero(n, static_cast<Eigen::Index>(d));
    e.col(static_cast<Eigen::Index>(k)).setOnes();
    cache.tangents[0].push_back(std::move(e));
  }

  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const auto W = m.weight(l);
    Mat z = affine(cache.activations[l], W, m.bias(l));
    std::vector<Mat> pre(d), tan(d);
    for (std::size_t k = 0; k < d; ++k) {
      pre[k].resize(n, W.rows());
      pre[k].noalias() = cache.tangents[l][k] * W.transpose();
    }
    if (l + 1 < m.num_layers()) {
      z = tanh_activation(z);
      const Mat slope = (1.0 - z.array().square()).matrix();
      for (std::size_t k = 0; k < d; ++k) tan[k] = pre[k].cwiseProduct(slope);
    } else {
      tan = pre;
    }
    cache.activations.push_back(std::move(z));
    cache.tangents.push_back(std::move(tan));
    cache.pre_tangents.push_back(std::move(pre));
  }
  return {cache.activations.back(), cache.tangents.back()};
}

inline MlpTangentOutput mlp_forward_tangent(const Mlp& m, const Mat& x) {
  MlpTangentCache cache;
  return mlp_forward_tangent(m, x, cache);
}

// Parameter gradient of sum_i <g_value_i, out_i> + sum_k <g_jacobian[k]_i, J_k,i>.
inline Vec mlp_backward_tangent(const Mlp& m, const MlpTangentCache& cache, const Mat& g_value,
                                const std::vector<Mat>& g_jacobian) {
  const std::size_t d = m.input_dim();
  const std::size_t L = m.num_layers();
  if (cache.activations.size() != L + 1) throw std::invalid_argument("mlp_backward_tangent: stale cache");
  if (g_jacobian.size() != d) throw std::invalid_argument("mlp_backward_tangent: need one Jacobian cotangent per input");

  Vec grad = Vec::Zero(static_cast<Eigen::Index>(m.num_parameters()));
  Mat ga = g_value;              // cotangent of a_{l+1}
  std::vector<Mat> gt = g_jacobian;  // cotangents of tangents[l+1][k]

  for (std::size_t l = L; l-- > 0;) {
    const auto W = m.weight(l);
    const Mat& a_in = cache.activations[l];
    Mat gz;
    std::vector<Mat> gpre(d);
    if (l + 1 < L) {
      const Mat& a = cache.activations[l + 1];
      const Mat slope = (1.0 - a.array().square()).matrix();
      Mat g_slope = Mat::Zero(a.rows(), a.cols());
      for (std::size_t k = 0; k < d; ++k) {
        gpre[k] = gt[k].cwiseProduct(slope);
        g_slope += gt[k].cwiseProduct(cache.pre_tangents[l + 1][k]);
      }
      // d slope / d a = -2 a, d a / d z = slope
      gz = (ga.array() - 2.0 * g_slope.array() * a.array()).matrix().cwiseProduct(slope);
    } else {
      gz = ga;
      gpre = gt;
    }
    auto gW = m.weight_in(grad, l);
    gW.noalias() = gz.transpose() * a_in;
    for (std::size_t k = 0; k < d; ++k) gW.noalias() += gpre[k].transpose() * cache.tangents[l][k];
    m.bias_in(grad, l) = gz.colwise().sum().transpose();
    if (l == 0) break;
    Mat next_ga(gz.rows(), W.cols());
    next_ga.noalias() = gz * W;
    ga = std::move(next_ga);
    for (std::size_t k = 0; k < d; ++k) {
      Mat t(gpre[k].rows(), W.cols());
      t.noalias() = gpre[k] * W;
      gt[k] = std::move(t);
    }
  }
  return grad;
}

}  // namespace tmvr
