#include "bh/hermite.hpp"

#include <cmath>

#include "bh/errors.hpp"

namespace bh {

double hermite_poly(int n, double xi) {
  if (n < 0) throw Error("hermite_poly: negative order");
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = xi;
  for (int k = 1; k < n; ++k) {
    const double next = xi * cur - k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double hermite_poly_derivative(int n, int k, double xi) {
  if (k > n) return 0.0;
  double falling = 1.0;
  for (int j = 0; j < k; ++j) falling *= (n - j);
  return falling * hermite_poly(n - k, xi);
}

double factorial(int n) {
  if (n < 0) throw Error("factorial of a negative number");
  if (n > 20) return std::exp(std::lgamma(n + 1.0));
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

namespace {

BayesElement make_1d(int n, double mu, double sigma) {
  const double norm = 1.0 / std::sqrt(factorial(n));
  return BayesElement(
      1,
      [=](const Vec& x) { return norm * hermite_poly(n, (x(0) - mu) / sigma); },
      [=](const Vec& x) {
        return Vec::Constant(1, norm * hermite_poly_derivative(n, 1, (x(0) - mu) / sigma) / sigma)
            .eval();
      },
      [=](const Vec& x) {
        return Mat::Constant(
                   1, 1,
                   norm * hermite_poly_derivative(n, 2, (x(0) - mu) / sigma) / (sigma * sigma))
            .eval();
      });
}

}  // namespace

HermiteBasis1D::HermiteBasis1D(int m, GaussianMeasure measure)
    : m_(m), measure_(std::move(measure)) {
  if (m_ < 1) throw ConfigError("Hermite basis needs at least one function");
  if (measure_.dim() != 1) throw DimensionMismatch("HermiteBasis1D needs a 1D measure");
  for (int n = 1; n <= m_; ++n) elements_.push_back(make_1d(n, mean(), stddev()));
}

const BayesElement& HermiteBasis1D::element(int n) const {
  if (n < 1 || n > m_)
    throw Error("Hermite basis index " + std::to_string(n) + " outside 1.." + std::to_string(m_));
  return elements_[static_cast<std::size_t>(n - 1)];
}

BayesElement basis_element(int n, const HermiteBasis1D& basis) { return basis.element(n); }

Vec coordinates(const BayesElement& p, const HermiteBasis1D& basis, const QuadratureSpec& spec) {
  if (p.dim() != 1) throw DimensionMismatch("Hermite coordinates need a 1D element");
  const NodeSet nodes = measure_nodes(basis.measure(), spec);
  const Mat lb = log_values(basis.elements(), nodes);
  const Mat lp = log_values({p}, nodes);
  return weighted_covariance(lb, lp, nodes.weights).col(0);
}

Vec coordinates_by_derivatives(const std::function<double(int, double)>& phi_derivative,
                               const HermiteBasis1D& basis, const QuadratureSpec& spec) {
  const NodeSet nodes = measure_nodes(basis.measure(), spec);
  Vec alpha(basis.size());
  const double sigma = basis.stddev();
  for (int n = 1; n <= basis.size(); ++n) {
    const double e = expect([&](const Vec& x) { return phi_derivative(n, x(0)); }, nodes);
    alpha(n - 1) = std::pow(sigma, n) / std::sqrt(factorial(n)) * e;
  }
  return alpha;
}

BayesElement reconstruct(const Vec& alpha, const HermiteBasis1D& basis) {
  if (alpha.size() != basis.size())
    throw DimensionMismatch("reconstruct: " + std::to_string(alpha.size()) +
                            " coordinates for a basis of " + std::to_string(basis.size()));
  return linear_combination(alpha, basis.elements());
}

namespace {

// psi_n = He_n / sqrt(n!) and its first two derivatives.
struct Psi {
  double v, d1, d2;
};

Psi psi(int n, double xi) {
  const double norm = 1.0 / std::sqrt(factorial(n));
  return {norm * hermite_poly(n, xi), norm * hermite_poly_derivative(n, 1, xi),
          norm * hermite_poly_derivative(n, 2, xi)};
}

BayesElement make_nd(const std::vector<int>& idx, const GaussianMeasure& measure) {
  const auto dim = static_cast<Eigen::Index>(idx.size());
  const Mat linv = measure.cholesky().triangularView<Eigen::Lower>().solve(Mat::Identity(dim, dim));
  const Vec mu = measure.mean();
  auto factors = [idx, dim](const Vec& xi) {
    std::vector<Psi> f;
    for (Eigen::Index k = 0; k < dim; ++k) f.push_back(psi(idx[static_cast<std::size_t>(k)], xi(k)));
    return f;
  };
  auto phi = [=](const Vec& x) {
    const Vec xi = linv * (x - mu);
    double v = 1.0;
    for (const auto& f : factors(xi)) v *= f.v;
    return v;
  };
  auto grad = [=](const Vec& x) {
    const Vec xi = linv * (x - mu);
    const auto f = factors(xi);
    Vec g(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
      double v = 1.0;
      for (Eigen::Index j = 0; j < dim; ++j)
        v *= (j == k) ? f[static_cast<std::size_t>(j)].d1 : f[static_cast<std::size_t>(j)].v;
      g(k) = v;
    }
    return (linv.transpose() * g).eval();
  };
  auto hess = [=](const Vec& x) {
    const Vec xi = linv * (x - mu);
    const auto f = factors(xi);
    Mat h(dim, dim);
    for (Eigen::Index a = 0; a < dim; ++a)
      for (Eigen::Index b = 0; b < dim; ++b) {
        double v = 1.0;
        for (Eigen::Index j = 0; j < dim; ++j) {
          const auto& fj = f[static_cast<std::size_t>(j)];
          if (a == b && j == a)
            v *= fj.d2;
          else if (j == a || j == b)
            v *= fj.d1;
          else
            v *= fj.v;
        }
        h(a, b) = v;
      }
    return (linv.transpose() * h * linv).eval();
  };
  return BayesElement(dim, phi, grad, hess);
}

}  // namespace

HermiteBasisND::HermiteBasisND(int m, int n, GaussianMeasure measure)
    : m_(m), n_(n), measure_(std::move(measure)) {
  if (m_ < 1 || m_ > kMaxHermiteNDOrder || n_ < 1 || n_ > kMaxHermiteNDDim)
    throw ConfigError("multivariate Hermite basis is limited to M <= 3, N <= 3");
  if (measure_.dim() != n_) throw DimensionMismatch("measure dimension does not match N");
  long total = 1;
  for (int k = 0; k < n_; ++k) total *= (m_ + 1);
  for (long code = 1; code < total; ++code) {
    std::vector<int> idx(static_cast<std::size_t>(n_));
    long rest = code;
    for (int k = n_ - 1; k >= 0; --k) {
      idx[static_cast<std::size_t>(k)] = static_cast<int>(rest % (m_ + 1));
      rest /= (m_ + 1);
    }
    elements_.push_back(make_nd(idx, measure_));
    indices_.push_back(std::move(idx));
  }
}

HermiteBasisND multivariate_basis(int m, int n, const GaussianMeasure& measure) {
  return HermiteBasisND(m, n, measure);
}

}  // namespace bh
