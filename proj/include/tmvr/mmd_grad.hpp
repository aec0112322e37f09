#pragma once

#include <cmath>
#include <stdexcept>

#include "tmvr/core.hpp"

namespace tmvr {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double distance(const double* a, const double* b, Eigen::Index d) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

}  // namespace detail

struct MmdValueAndGrad {
  double value = 0.0;  // unclamped V-statistic
  Mat gradient;        // d value / d generated, one row per generated point
};

// Energy-MMD V-statistic between `generated` and `target` together with its
// gradient in the generated points. Coincident pairs contribute zero.
inline MmdValueAndGrad mmd_loss_grad(const Mat& generated, const Mat& target) {
  if (generated.rows() < 1 || target.rows() < 1) throw std::invalid_argument("mmd_loss_grad: empty batch");
  if (generated.cols() != target.cols()) throw std::invalid_argument("mmd_loss_grad: dimension mismatch");
  const Eigen::Index nx = generated.rows();
  const Eigen::Index ny = target.rows();
  const Eigen::Index d = generated.cols();
  const double wxy = 2.0 / (static_cast<double>(nx) * static_cast<double>(ny));
  const double wxx = 1.0 / (static_cast<double>(nx) * static_cast<double>(nx));
  const double wyy = 1.0 / (static_cast<double>(ny) * static_cast<double>(ny));

  using detail::distance;
  using RowMat = detail::RowMat;
  MmdValueAndGrad out;
  // row-major copies keep the pair loops on contiguous memory
  const RowMat X = generated;
  const RowMat Y = target;
  RowMat G = RowMat::Zero(nx, d);
  double cross = 0.0, sxx = 0.0, syy = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i) {
    const double* xi = X.data() + i * d;
    double* gi = G.data() + i * d;
    for (Eigen::Index j = 0; j < ny; ++j) {
      const double* yj = Y.data() + j * d;
      const double r = distance(xi, yj, d);
      cross += r;
      if (r > 0.0) {
        const double w = wxy / r;
        for (Eigen::Index k = 0; k < d; ++k) gi[k] += w * (xi[k] - yj[k]);
      }
    }
    for (Eigen::Index j = i + 1; j < nx; ++j) {
      const double* xj = X.data() + j * d;
      double* gj = G.data() + j * d;
      const double r = distance(xi, xj, d);
      sxx += 2.0 * r;
      if (r > 0.0) {
        // each unordered pair appears twice in the double sum
        const double w = 2.0 * wxx / r;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double g = w * (xi[k] - xj[k]);
          gi[k] -= g;
          gj[k] += g;
        }
      }
    }
  }
  for (Eigen::Index i = 0; i < ny; ++i)
    for (Eigen::Index j = i + 1; j < ny; ++j) syy += 2.0 * distance(Y.data() + i * d, Y.data() + j * d, d);
  out.gradient = G;
  out.value = wxy * cross - wxx * sxx - wyy * syy;
  return out;
}

}  // namespace tmvr
