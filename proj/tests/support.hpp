#pragma once

// Independent oracles for the test suites. Nothing here calls into the
// library's quadrature or basis code.

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * kPi * var);
}

/// E[f] under N(mean, var) by Simpson on mean +/- 12 sd.
inline double normal_expect(const std::function<double(double)>& f, double mean, double var,
                            int n = 20000) {
  const double sd = std::sqrt(var);
  return simpson([&](double x) { return f(x) * normal_pdf(x, mean, var); }, mean - 12 * sd,
                 mean + 12 * sd, n);
}

/// Covariance of f and g under N(mean, var).
inline double normal_cov(const std::function<double(double)>& f,
                         const std::function<double(double)>& g, double mean, double var) {
  const double ef = normal_expect(f, mean, var);
  const double eg = normal_expect(g, mean, var);
  return normal_expect([&](double x) { return (f(x) - ef) * (g(x) - eg); }, mean, var);
}

/// Probabilist Hermite polynomials from their explicit coefficients.
inline double hermite_explicit(int n, double x) {
  switch (n) {
    case 0: return 1.0;
    case 1: return x;
    case 2: return x * x - 1.0;
    case 3: return x * x * x - 3.0 * x;
    case 4: return std::pow(x, 4) - 6.0 * x * x + 3.0;
    case 5: return std::pow(x, 5) - 10.0 * std::pow(x, 3) + 15.0 * x;
    case 6: return std::pow(x, 6) - 15.0 * std::pow(x, 4) + 45.0 * x * x - 15.0;
    default: return std::nan("");
  }
}

inline double double_factorial_odd(int k) {  // (k-1)!! for even k, E[xi^k]
  double r = 1.0;
  for (int i = k - 1; i > 1; i -= 2) r *= i;
  return r;
}

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = n(rng);
  return a;
}

inline Mat random_spd(std::mt19937_64& rng, int n, double floor = 0.5) {
  const Mat a = random_matrix(rng, n, n);
  return a * a.transpose() / n + floor * Mat::Identity(n, n);
}

inline Vec random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  return scale * random_matrix(rng, n, 1);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Central-difference gradient of a scalar function of a vector.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

/// Central-difference Jacobian of a vector function.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += h;
    b(i) -= h;
    j.col(i) = (f(a) - f(b)) / (2 * h);
  }
  return j;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

inline double max_abs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace oracle
