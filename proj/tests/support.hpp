#pragma once

// Shared helpers for the test suites: seeded generators and finite
// differences used as independent oracles.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>

namespace testing_support {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Vec vec(int n, double lo = -1.0, double hi = 1.0) {
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = uniform(lo, hi);
    return x;
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
};

/// Central differences of a scalar function.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double step = 1e-6) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a[i] += step;
    b[i] -= step;
    g[i] = (f(a) - f(b)) / (2.0 * step);
  }
  return g;
}

/// Central differences of a vector function; J(i, j) = d f_i / d x_j.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double step = 1e-6) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec a = x, b = x;
    a[j] += step;
    b[j] -= step;
    J.col(j) = (f(a) - f(b)) / (2.0 * step);
  }
  return J;
}

inline double rel_err(const Vec& a, const Vec& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

}  // namespace testing_support
