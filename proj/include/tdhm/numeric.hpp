#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace tdhm {

inline constexpr double neg_inf() { return -std::numeric_limits<double>::infinity(); }
inline constexpr double pos_inf() { return std::numeric_limits<double>::infinity(); }

// Standard logistic function, exact at +-infinity.
inline double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(logistic(x)) without intermediate underflow; log_logistic(-x) gives
// log(1 - logistic(x)).
inline double log_logistic(double x) {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log(sum_i exp(x_i)) with max subtraction; -inf entries are ignored.
inline double log_sum_exp(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) {
    return m;  // all -inf (or a +inf entry, which the caller must not pass)
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    s += std::exp(x[i] - m);
  }
  return m + std::log(s);
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& x) {
  const double m = x.maxCoeff();
  Eigen::VectorXd p = (x.array() - m).exp();
  p /= p.sum();
  return p;
}

}  // namespace tdhm
