#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tmvr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Raised when a computation produces a non-finite value. `index` is the row
// or step at which it happened, or -1 when not applicable.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long index = -1)
      : std::runtime_error(what), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

// Representative of an angle in [-pi, pi).
inline double wrap_angle(double x) {
  double r = std::fmod(x + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  double out = r - kPi;
  return out >= kPi ? -kPi : out;
}

inline double circle_distance(double a, double b) {
  double d = std::fabs(wrap_angle(a - b));
  return d;
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

// The n x d matrix of sample points backing an empirical measure.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  explicit ParticleEnsemble(Mat points) : points_(std::move(points)) { validate(); }

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(points_.cols()); }
  const Mat& points() const { return points_; }
  Vec point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)).transpose(); }

  bool operator==(const ParticleEnsemble& other) const {
    return points_.rows() == other.points_.rows() && points_.cols() == other.points_.cols() &&
           points_ == other.points_;
  }

 private:
  void validate() const {
    if (points_.rows() < 1 || points_.cols() < 1)
      throw std::invalid_argument("ParticleEnsemble: need at least one point of dimension >= 1");
    for (Eigen::Index i = 0; i < points_.rows(); ++i)
      if (!points_.row(i).allFinite())
        throw NumericError("ParticleEnsemble: non-finite row " + std::to_string(i), i);
  }

  Mat points_;
};

}  // namespace tmvr
