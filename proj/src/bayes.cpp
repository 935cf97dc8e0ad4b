#include "bh/bayes.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "bh/errors.hpp"

namespace bh {

namespace {

double fd_step(double xi, double power) {
  return std::pow(std::numeric_limits<double>::epsilon(), power) * std::max(1.0, std::abs(xi));
}

void require_same_dim(const BayesElement& p, const BayesElement& q, const char* op) {
  if (p.dim() != q.dim())
    throw DimensionMismatch(std::string(op) + ": dimensions " + std::to_string(p.dim()) +
                            " and " + std::to_string(q.dim()) + " differ");
}

}  // namespace

BayesElement::BayesElement(Eigen::Index dim, Phi phi, Grad grad, Hess hess)
    : dim_(dim), phi_(std::move(phi)), grad_(std::move(grad)), hess_(std::move(hess)) {
  if (dim_ < 1) throw DimensionMismatch("element dimension must be positive");
  if (!phi_) throw Error("element needs a phi function");
}

BayesElement BayesElement::zero(Eigen::Index dim) {
  return BayesElement(
      dim, [](const Vec&) { return 0.0; }, [dim](const Vec&) { return Vec::Zero(dim).eval(); },
      [dim](const Vec&) { return Mat::Zero(dim, dim).eval(); });
}

BayesElement BayesElement::quadratic(Vec mean, Mat info) {
  if (info.rows() != mean.size() || info.cols() != mean.size())
    throw DimensionMismatch("quadratic: information does not match mean");
  const Eigen::Index dim = mean.size();
  return BayesElement(
      dim,
      [mean, info](const Vec& x) {
        const Vec d = x - mean;
        return 0.5 * d.dot(info * d);
      },
      [mean, info](const Vec& x) { return (info * (x - mean)).eval(); },
      [info](const Vec&) { return info; });
}

BayesElement BayesElement::gaussian(const GaussianMeasure& g) {
  return quadratic(g.mean(), g.information());
}

BayesElement BayesElement::gaussian(double mean, double variance) {
  return quadratic(Vec::Constant(1, mean), Mat::Constant(1, 1, 1.0 / variance));
}

Vec BayesElement::gradient(const Vec& x) const {
  if (grad_) return grad_(x);
  Vec g(dim_);
  Vec xp = x;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const double h = fd_step(x(i), 1.0 / 3.0);
    xp(i) = x(i) + h;
    const double fp = phi_(xp);
    xp(i) = x(i) - h;
    const double fm = phi_(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

Mat BayesElement::hessian(const Vec& x) const {
  if (hess_) return hess_(x);
  Mat h(dim_, dim_);
  if (grad_) {
    Vec xp = x;
    for (Eigen::Index j = 0; j < dim_; ++j) {
      const double s = fd_step(x(j), 1.0 / 3.0);
      xp(j) = x(j) + s;
      const Vec gp = grad_(xp);
      xp(j) = x(j) - s;
      const Vec gm = grad_(xp);
      xp(j) = x(j);
      h.col(j) = (gp - gm) / (2.0 * s);
    }
  } else {
    // Second differences of phi need a wider step than first differences.
    Vec xp = x;
    for (Eigen::Index i = 0; i < dim_; ++i) {
      for (Eigen::Index j = i; j < dim_; ++j) {
        const double si = fd_step(x(i), 0.25);
        const double sj = fd_step(x(j), 0.25);
        auto at = [&](double di, double dj) {
          xp = x;
          xp(i) += di;
          xp(j) += dj;
          return phi_(xp);
        };
        double v;
        if (i == j) {
          v = (at(si, 0.0) - 2.0 * phi_(x) + at(-si, 0.0)) / (si * si);
        } else {
          v = (at(si, sj) - at(si, -sj) - at(-si, sj) + at(-si, -sj)) / (4.0 * si * sj);
        }
        h(i, j) = v;
        h(j, i) = v;
      }
    }
    return h;
  }
  return 0.5 * (h + h.transpose());
}

BayesElement add(const BayesElement& p, const BayesElement& q) {
  require_same_dim(p, q, "add");
  BayesElement::Grad grad;
  BayesElement::Hess hess;
  if (p.has_gradient() && q.has_gradient())
    grad = [gp = p.grad_fn(), gq = q.grad_fn()](const Vec& x) { return (gp(x) + gq(x)).eval(); };
  if (p.has_hessian() && q.has_hessian())
    hess = [hp = p.hess_fn(), hq = q.hess_fn()](const Vec& x) { return (hp(x) + hq(x)).eval(); };
  return BayesElement(
      p.dim(), [fp = p.phi_fn(), fq = q.phi_fn()](const Vec& x) { return fp(x) + fq(x); },
      std::move(grad), std::move(hess));
}

BayesElement scale(double a, const BayesElement& p) {
  // a == 0 must give exactly zero even where phi is infinite.
  if (a == 0.0) return BayesElement::zero(p.dim());
  BayesElement::Grad grad;
  BayesElement::Hess hess;
  if (p.has_gradient()) grad = [a, g = p.grad_fn()](const Vec& x) { return (a * g(x)).eval(); };
  if (p.has_hessian()) hess = [a, h = p.hess_fn()](const Vec& x) { return (a * h(x)).eval(); };
  return BayesElement(
      p.dim(), [a, f = p.phi_fn()](const Vec& x) { return a * f(x); }, std::move(grad),
      std::move(hess));
}

BayesElement subtract(const BayesElement& p, const BayesElement& q) {
  require_same_dim(p, q, "subtract");
  BayesElement::Grad grad;
  BayesElement::Hess hess;
  if (p.has_gradient() && q.has_gradient())
    grad = [gp = p.grad_fn(), gq = q.grad_fn()](const Vec& x) { return (gp(x) - gq(x)).eval(); };
  if (p.has_hessian() && q.has_hessian())
    hess = [hp = p.hess_fn(), hq = q.hess_fn()](const Vec& x) { return (hp(x) - hq(x)).eval(); };
  return BayesElement(
      p.dim(), [fp = p.phi_fn(), fq = q.phi_fn()](const Vec& x) { return fp(x) - fq(x); },
      std::move(grad), std::move(hess));
}

BayesElement linear_combination(const Vec& coefficients,
                                const std::vector<BayesElement>& elements) {
  if (static_cast<std::size_t>(coefficients.size()) != elements.size())
    throw DimensionMismatch("linear_combination: coefficient count does not match elements");
  if (elements.empty()) throw DimensionMismatch("linear_combination needs at least one element");
  const Eigen::Index dim = elements.front().dim();
  bool grads = true;
  bool hessians = true;
  for (const auto& e : elements) {
    if (e.dim() != dim) throw DimensionMismatch("linear_combination: mixed dimensions");
    grads = grads && e.has_gradient();
    hessians = hessians && e.has_hessian();
  }
  BayesElement::Grad grad;
  BayesElement::Hess hess;
  if (grads)
    grad = [coefficients, elements, dim](const Vec& x) {
      Vec g = Vec::Zero(dim);
      for (std::size_t m = 0; m < elements.size(); ++m)
        if (coefficients(static_cast<Eigen::Index>(m)) != 0.0)
          g += coefficients(static_cast<Eigen::Index>(m)) * elements[m].gradient(x);
      return g;
    };
  if (hessians)
    hess = [coefficients, elements, dim](const Vec& x) {
      Mat h = Mat::Zero(dim, dim);
      for (std::size_t m = 0; m < elements.size(); ++m)
        if (coefficients(static_cast<Eigen::Index>(m)) != 0.0)
          h += coefficients(static_cast<Eigen::Index>(m)) * elements[m].hessian(x);
      return h;
    };
  return BayesElement(
      dim,
      [coefficients, elements](const Vec& x) {
        double s = 0.0;
        for (std::size_t m = 0; m < elements.size(); ++m)
          if (coefficients(static_cast<Eigen::Index>(m)) != 0.0)
            s += coefficients(static_cast<Eigen::Index>(m)) * elements[m].phi(x);
        return s;
      },
      std::move(grad), std::move(hess));
}

bool equivalent(const BayesElement& p, const BayesElement& q,
                const GaussianMeasure& sample_measure, double tol) {
  require_same_dim(p, q, "equivalent");
  constexpr int kSamples = 64;
  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec diff(kSamples);
  double magnitude = 0.0;
  Vec xi(p.dim());
  for (int s = 0; s < kSamples; ++s) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = normal(rng);
    const Vec x = sample_measure.from_standard(xi);
    const double a = p.phi(x);
    const double b = q.phi(x);
    diff(s) = a - b;
    magnitude += 0.5 * (std::abs(a) + std::abs(b));
  }
  magnitude /= kSamples;
  if (!diff.allFinite()) return false;
  const double mean = diff.mean();
  const double sd = std::sqrt((diff.array() - mean).square().sum() / kSamples);
  return sd < tol * (1.0 + magnitude);
}

Normalized normalize(const BayesElement& p, const QuadratureSpec& spec) {
  if (spec.kind != RuleKind::grid) throw ConfigError("normalize needs a grid rule");
  if (static_cast<Eigen::Index>(spec.grid_bounds.size()) != p.dim())
    throw DimensionMismatch("normalize: grid dimension does not match element");
  const double log_z = log_partition(p.phi_fn(), spec);
  Normalized out;
  out.log_partition = log_z;
  out.constant = std::exp(-log_z);
  out.density = [f = p.phi_fn(), log_z](const Vec& x) { return std::exp(-f(x) - log_z); };
  return out;
}

Mat log_values(const std::vector<BayesElement>& elements, const NodeSet& nodes) {
  Mat out(nodes.size(), static_cast<Eigen::Index>(elements.size()));
  for (std::size_t m = 0; m < elements.size(); ++m) {
    if (elements[m].dim() != nodes.dim())
      throw DimensionMismatch("element dimension does not match the measure");
    for (Eigen::Index c = 0; c < nodes.size(); ++c) {
      if (nodes.weights(c) == 0.0) {
        out(c, static_cast<Eigen::Index>(m)) = 0.0;
        continue;
      }
      const double v = elements[m].log_value(nodes.points.col(c));
      if (!std::isfinite(v))
        throw EvaluationFailure("ln of element " + std::to_string(m) +
                                " is not finite at a quadrature node");
      out(c, static_cast<Eigen::Index>(m)) = v;
    }
  }
  return out;
}

Mat weighted_covariance(const Mat& a, const Mat& b, const Vec& weights) {
  const Eigen::RowVectorXd ma = weights.transpose() * a;
  const Eigen::RowVectorXd mb = weights.transpose() * b;
  const Mat ca = a.rowwise() - ma;
  const Mat cb = b.rowwise() - mb;
  return ca.transpose() * weights.asDiagonal() * cb;
}

double inner_product(const BayesElement& p, const BayesElement& q, const NodeSet& nodes) {
  require_same_dim(p, q, "inner_product");
  const Mat lp = log_values({p}, nodes);
  const Mat lq = log_values({q}, nodes);
  return weighted_covariance(lp, lq, nodes.weights)(0, 0);
}

double inner_product(const BayesElement& p, const BayesElement& q, const GaussianMeasure& nu,
                     const QuadratureSpec& spec) {
  return inner_product(p, q, measure_nodes(nu, spec));
}

double information(const BayesElement& p, const NodeSet& nodes) {
  return 0.5 * inner_product(p, p, nodes);
}

double information(const BayesElement& p, const GaussianMeasure& nu, const QuadratureSpec& spec) {
  return information(p, measure_nodes(nu, spec));
}

double divergence(const BayesElement& p, const BayesElement& q, const NodeSet& nodes) {
  return information(subtract(p, q), nodes);
}

double divergence(const BayesElement& p, const BayesElement& q, const GaussianMeasure& nu,
                  const QuadratureSpec& spec) {
  return divergence(p, q, measure_nodes(nu, spec));
}

BayesElement stochastic_derivative(const std::function<BayesElement(double)>& family,
                                   double theta, double step) {
  if (!(step > 0.0)) throw Error("stochastic_derivative: step must be positive");
  const BayesElement up = family(theta + step);
  const BayesElement down = family(theta - step);
  return scale(1.0 / (2.0 * step), subtract(up, down));
}

}  // namespace bh
