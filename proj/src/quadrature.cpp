#include "bh/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "bh/errors.hpp"
#include "bh/hermite.hpp"

namespace bh {

namespace {

// Orthonormal Hermite recurrence psi_k = He_k / sqrt(k!). Returns (psi_n, psi_{n-1}).
std::pair<double, double> normalized_hermite(int n, double x) {
  double prev = 0.0;
  double cur = 1.0;
  for (int k = 0; k < n; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) /
                        std::sqrt(static_cast<double>(k + 1));
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

std::string describe(const Vec& x) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
  os << "]";
  return os.str();
}

// Trapezoid nodes/weights for one interval.
std::pair<Vec, Vec> trapezoid_1d(const Interval& iv, int n) {
  Vec x(n);
  Vec w(n);
  if (n == 1) {
    x(0) = 0.5 * (iv.lo + iv.hi);
    w(0) = iv.hi - iv.lo;
    return {x, w};
  }
  const double h = (iv.hi - iv.lo) / (n - 1);
  for (int i = 0; i < n; ++i) {
    x(i) = (i == n - 1) ? iv.hi : iv.lo + h * i;
    w(i) = (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
  return {x, w};
}

void check_tensor_size(Eigen::Index dim, int per_dim) {
  if (dim < 1 || dim > kMaxTensorDim)
    throw DimensionMismatch("tensor rules support 1.." + std::to_string(kMaxTensorDim) +
                            " dimensions, got " + std::to_string(dim));
  if (std::pow(static_cast<double>(per_dim), static_cast<double>(dim)) > kMaxTensorNodes)
    throw DimensionMismatch("tensor rule would exceed the node budget");
}

// Tensor product of per-dimension rules; the last dimension varies fastest.
NodeSet tensor(const std::vector<Vec>& xs, const std::vector<Vec>& ws) {
  const auto dim = static_cast<Eigen::Index>(xs.size());
  Eigen::Index total = 1;
  for (const auto& x : xs) total *= x.size();
  NodeSet out{Mat(dim, total), Vec(total)};
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim), 0);
  for (Eigen::Index c = 0; c < total; ++c) {
    double w = 1.0;
    for (Eigen::Index d = 0; d < dim; ++d) {
      const auto k = static_cast<std::size_t>(d);
      out.points(d, c) = xs[k](idx[k]);
      w *= ws[k](idx[k]);
    }
    out.weights(c) = w;
    for (Eigen::Index d = dim - 1; d >= 0; --d) {
      const auto k = static_cast<std::size_t>(d);
      if (++idx[k] < xs[k].size()) break;
      idx[k] = 0;
    }
  }
  return out;
}

}  // namespace

QuadratureSpec QuadratureSpec::gauss_hermite(int nodes) {
  QuadratureSpec s;
  s.kind = RuleKind::gauss_hermite;
  s.nodes_per_dim = nodes;
  s.validate();
  return s;
}

QuadratureSpec QuadratureSpec::grid(std::vector<Interval> bounds, int nodes) {
  QuadratureSpec s;
  s.kind = RuleKind::grid;
  s.nodes_per_dim = nodes;
  s.grid_bounds = std::move(bounds);
  s.validate();
  return s;
}

QuadratureSpec QuadratureSpec::grid_around(const GaussianMeasure& nu, double half_width,
                                           int nodes) {
  std::vector<Interval> bounds;
  for (Eigen::Index i = 0; i < nu.dim(); ++i) {
    const double sd = std::sqrt(nu.covariance()(i, i));
    bounds.push_back({nu.mean()(i) - half_width * sd, nu.mean()(i) + half_width * sd});
  }
  return grid(std::move(bounds), nodes);
}

void QuadratureSpec::validate() const {
  if (nodes_per_dim < 1) throw ConfigError("nodes_per_dim must be positive");
  if (kind == RuleKind::gauss_hermite && nodes_per_dim > kMaxGaussHermiteNodes)
    throw ConfigError("Gauss-Hermite rules support at most 64 nodes");
  if (kind == RuleKind::grid) {
    if (grid_bounds.empty()) throw ConfigError("grid rule needs bounds");
    for (const auto& b : grid_bounds)
      if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi))
        throw ConfigError("grid bounds must be finite and ordered");
  }
}

GaussHermiteRule gauss_hermite_rule(int n) {
  if (n < 1 || n > kMaxGaussHermiteNodes)
    throw ConfigError("Gauss-Hermite order must be in 1..64, got " + std::to_string(n));
  // Golub-Welsch for starting values, then Newton on the orthonormal recurrence.
  Mat jacobi = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi, Eigen::EigenvaluesOnly);
  Vec x = es.eigenvalues();
  Vec w(n);
  const double sn = std::sqrt(static_cast<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int it = 0; it < 8; ++it) {
      const auto [pn, pm] = normalized_hermite(n, x(i));
      if (pm == 0.0) break;
      const double dx = pn / (sn * pm);
      x(i) -= dx;
      if (std::abs(dx) < 1e-16 * std::max(1.0, std::abs(x(i)))) break;
    }
    const auto [pn, pm] = normalized_hermite(n, x(i));
    (void)pn;
    w(i) = 1.0 / (n * pm * pm);
  }
  // Enforce exact symmetry so odd moments vanish.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double xs = 0.5 * (x(j) - x(i));
    const double ws = 0.5 * (w(i) + w(j));
    x(i) = -xs;
    x(j) = xs;
    w(i) = ws;
    w(j) = ws;
  }
  if (n % 2 == 1) x(n / 2) = 0.0;
  w /= w.sum();
  return {x, w};
}

NodeSet measure_nodes(const GaussianMeasure& nu, const QuadratureSpec& spec) {
  spec.validate();
  const Eigen::Index dim = nu.dim();
  check_tensor_size(dim, spec.nodes_per_dim);
  if (spec.kind == RuleKind::gauss_hermite) {
    const auto rule = gauss_hermite_rule(spec.nodes_per_dim);
    std::vector<Vec> xs(static_cast<std::size_t>(dim), rule.nodes);
    std::vector<Vec> ws(static_cast<std::size_t>(dim), rule.weights);
    NodeSet out = tensor(xs, ws);
    for (Eigen::Index c = 0; c < out.size(); ++c)
      out.points.col(c) = nu.from_standard(out.points.col(c));
    return out;
  }
  if (static_cast<Eigen::Index>(spec.grid_bounds.size()) != dim)
    throw DimensionMismatch("grid bounds do not match measure dimension");
  NodeSet out = lebesgue_grid(spec);
  Vec logd(out.size());
  for (Eigen::Index c = 0; c < out.size(); ++c) logd(c) = nu.log_density(out.points.col(c));
  const double top = logd.maxCoeff();
  for (Eigen::Index c = 0; c < out.size(); ++c) out.weights(c) *= std::exp(logd(c) - top);
  out.weights /= out.weights.sum();
  return out;
}

NodeSet lebesgue_grid(const QuadratureSpec& spec) {
  if (spec.kind != RuleKind::grid) throw ConfigError("a Lebesgue grid needs a grid spec");
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.grid_bounds.size());
  check_tensor_size(dim, spec.nodes_per_dim);
  std::vector<Vec> xs;
  std::vector<Vec> ws;
  for (const auto& b : spec.grid_bounds) {
    auto [x, w] = trapezoid_1d(b, spec.nodes_per_dim);
    xs.push_back(std::move(x));
    ws.push_back(std::move(w));
  }
  return tensor(xs, ws);
}

namespace {

// exp(-(phi - min phi)) on a Lebesgue grid, with the boundary-decay check.
struct WeighedGrid {
  NodeSet grid;
  double phi_min = 0.0;
};

WeighedGrid weigh_density(const std::function<double(const Vec&)>& phi,
                          const QuadratureSpec& spec) {
  NodeSet grid = lebesgue_grid(spec);
  const Eigen::Index count = grid.size();
  Vec values(count);
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < count; ++c) {
    const double v = phi(grid.points.col(c));
    if (std::isnan(v)) throw EvaluationFailure("phi is NaN at " + describe(grid.points.col(c)));
    if (v == -std::numeric_limits<double>::infinity())
      throw NotNormalizable("phi is -inf at " + describe(grid.points.col(c)));
    values(c) = v;
    lo = std::min(lo, v);
  }
  if (!std::isfinite(lo)) throw NotNormalizable("element vanishes on the whole grid");
  const Eigen::Index dim = grid.dim();
  for (Eigen::Index c = 0; c < count; ++c) {
    const double rel = std::exp(-(values(c) - lo));
    bool edge = false;
    for (Eigen::Index d = 0; d < dim; ++d) {
      const auto& b = spec.grid_bounds[static_cast<std::size_t>(d)];
      if (grid.points(d, c) == b.lo || grid.points(d, c) == b.hi) edge = true;
    }
    // Mass sitting on the boundary means the integral is being truncated.
    if (edge && rel > spec.tolerance)
      throw NotNormalizable("density does not decay at the grid boundary near " +
                            describe(grid.points.col(c)));
    grid.weights(c) *= rel;
  }
  return {std::move(grid), lo};
}

}  // namespace

NodeSet density_nodes(const std::function<double(const Vec&)>& phi, const QuadratureSpec& spec) {
  WeighedGrid wg = weigh_density(phi, spec);
  const double total = wg.grid.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NotNormalizable("density mass is not finite");
  wg.grid.weights /= total;
  return std::move(wg.grid);
}

double log_partition(const std::function<double(const Vec&)>& phi, const QuadratureSpec& spec) {
  const WeighedGrid wg = weigh_density(phi, spec);
  const double total = wg.grid.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NotNormalizable("density mass is not finite");
  return std::log(total) - wg.phi_min;
}

double expect(const ScalarFn& f, const NodeSet& nodes) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < nodes.size(); ++c) {
    if (nodes.weights(c) == 0.0) continue;
    const double v = f(nodes.points.col(c));
    if (!std::isfinite(v))
      throw EvaluationFailure("integrand is not finite at " + describe(nodes.points.col(c)));
    acc += nodes.weights(c) * v;
  }
  return acc;
}

double expect(const ScalarFn& f, const GaussianMeasure& nu, const QuadratureSpec& spec) {
  return expect(f, measure_nodes(nu, spec));
}

Vec expect_vector(const std::function<Vec(const Vec&)>& f, const NodeSet& nodes) {
  Vec acc;
  for (Eigen::Index c = 0; c < nodes.size(); ++c) {
    if (nodes.weights(c) == 0.0) continue;
    const Vec v = f(nodes.points.col(c));
    if (!v.allFinite())
      throw EvaluationFailure("integrand is not finite at " + describe(nodes.points.col(c)));
    if (acc.size() == 0) acc = Vec::Zero(v.size());
    acc += nodes.weights(c) * v;
  }
  return acc;
}

Mat expect_matrix(const std::function<Mat(const Vec&)>& f, const NodeSet& nodes) {
  Mat acc;
  for (Eigen::Index c = 0; c < nodes.size(); ++c) {
    if (nodes.weights(c) == 0.0) continue;
    const Mat v = f(nodes.points.col(c));
    if (!v.allFinite())
      throw EvaluationFailure("integrand is not finite at " + describe(nodes.points.col(c)));
    if (acc.size() == 0) acc = Mat::Zero(v.rows(), v.cols());
    acc += nodes.weights(c) * v;
  }
  return acc;
}

QuadratureSpec rule_avoiding_pole(const GaussianMeasure& nu, double pole,
                                  const QuadratureSpec& preferred, int grid_nodes) {
  if (nu.dim() != 1) throw DimensionMismatch("pole handling is one-dimensional");
  const double mu = nu.mean()(0);
  const double sd = std::sqrt(nu.covariance()(0, 0));
  const double dist = std::abs(mu - pole);
  // Nodes keep a gap of a tenth of the mean-to-pole distance.
  const double reach = 0.9 * dist;
  if (preferred.kind == RuleKind::gauss_hermite && dist >= 6.0 * sd) {
    const double outer = gauss_hermite_rule(preferred.nodes_per_dim).nodes.cwiseAbs().maxCoeff();
    if (outer * sd <= reach) return preferred;
  }
  Interval iv{mu - 8.0 * sd, mu + 8.0 * sd};
  if (mu > pole)
    iv.lo = std::max(iv.lo, mu - reach);
  else
    iv.hi = std::min(iv.hi, mu + reach);
  return QuadratureSpec::grid({iv}, grid_nodes);
}

SteinSides stein_check(const std::function<double(double)>& f,
                       const std::function<double(double)>& nth_derivative, int n,
                       const QuadratureSpec& spec) {
  const NodeSet nodes = measure_nodes(GaussianMeasure::standard(1), spec);
  SteinSides s;
  s.lhs = expect([&](const Vec& x) { return hermite_poly(n, x(0)) * f(x(0)); }, nodes);
  s.rhs = expect([&](const Vec& x) { return nth_derivative(x(0)); }, nodes);
  return s;
}

SteinSides stein_step_check(const std::function<double(double)>& f,
                            const std::function<double(double)>& derivative, int n,
                            const QuadratureSpec& spec) {
  const NodeSet nodes = measure_nodes(GaussianMeasure::standard(1), spec);
  SteinSides s;
  s.lhs = expect([&](const Vec& x) { return hermite_poly(n + 1, x(0)) * f(x(0)); }, nodes);
  s.rhs = expect([&](const Vec& x) { return hermite_poly(n, x(0)) * derivative(x(0)); }, nodes);
  return s;
}

SteinSides stein_check_nd(const ScalarFn& f, const ScalarFn& mixed_derivative,
                          const std::vector<int>& orders, const QuadratureSpec& spec) {
  const auto dim = static_cast<Eigen::Index>(orders.size());
  const NodeSet nodes = measure_nodes(GaussianMeasure::standard(dim), spec);
  SteinSides s;
  s.lhs = expect(
      [&](const Vec& x) {
        double h = 1.0;
        for (Eigen::Index d = 0; d < dim; ++d)
          h *= hermite_poly(orders[static_cast<std::size_t>(d)], x(d));
        return h * f(x);
      },
      nodes);
  s.rhs = expect(mixed_derivative, nodes);
  return s;
}

double finite_difference_derivative(const std::function<double(double)>& f, double x, int n,
                                    double step) {
  if (n == 0) return f(x);
  return (finite_difference_derivative(f, x + step, n - 1, step) -
          finite_difference_derivative(f, x - step, n - 1, step)) /
         (2.0 * step);
}

}  // namespace bh
