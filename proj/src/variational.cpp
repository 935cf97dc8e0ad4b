#include "bh/variational.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "bh/errors.hpp"
#include "bh/hermite.hpp"

namespace bh {

Mat gram(const std::vector<BayesElement>& basis, const NodeSet& nodes) {
  if (basis.empty()) throw Error("gram: empty basis");
  const Mat lb = log_values(basis, nodes);
  const Mat g = weighted_covariance(lb, lb, nodes.weights);
  return 0.5 * (g + g.transpose());
}

Mat gram(const std::vector<BayesElement>& basis, const GaussianMeasure& nu,
         const QuadratureSpec& spec) {
  return gram(basis, measure_nodes(nu, spec));
}

Vec solve_gram(const Mat& g, const Vec& rhs) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() == Eigen::Success) return llt.solve(rhs);
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  Vec lam = eig.eigenvalues();
  const double top = lam.cwiseAbs().maxCoeff();
  if (!(top > 0.0)) throw SingularGram("Gram matrix is zero");
  const double floor = 1e-12 * top;
  int floored = 0;
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < floor) {
      lam(i) = floor;
      ++floored;
    }
  }
  if (floored > 1)
    throw SingularGram("Gram matrix has " + std::to_string(floored) +
                       " eigenvalues below 1e-12 of the largest");
  const Mat& v = eig.eigenvectors();
  return v * (v.transpose() * rhs).cwiseQuotient(lam);
}

Coordinates project(const BayesElement& p, const std::vector<BayesElement>& basis,
                    const NodeSet& nodes) {
  const Mat lb = log_values(basis, nodes);
  const Mat g = weighted_covariance(lb, lb, nodes.weights);
  const Vec rhs = weighted_covariance(lb, log_values({p}, nodes), nodes.weights).col(0);
  return solve_gram(0.5 * (g + g.transpose()), rhs);
}

Coordinates project(const BayesElement& p, const std::vector<BayesElement>& basis,
                    const GaussianMeasure& nu, const QuadratureSpec& spec) {
  return project(p, basis, measure_nodes(nu, spec));
}

BayesElement reconstruct(const Coordinates& alpha, const std::vector<BayesElement>& basis) {
  if (alpha.size() != static_cast<Eigen::Index>(basis.size()))
    throw DimensionMismatch("reconstruct: " + std::to_string(alpha.size()) +
                            " coordinates for a basis of " + std::to_string(basis.size()));
  return linear_combination(alpha, basis);
}

OuterProduct projection_kernel(const std::vector<BayesElement>& basis, const NodeSet& nodes) {
  const Mat g = gram(basis, nodes);
  const auto m = static_cast<Eigen::Index>(basis.size());
  Mat inv(m, m);
  for (Eigen::Index j = 0; j < m; ++j) inv.col(j) = solve_gram(g, Vec::Unit(m, j));
  return {basis, 0.5 * (inv + inv.transpose())};
}

BayesElement kernel_apply(const OuterProduct& kernel, const BayesElement& p, const NodeSet& nodes) {
  const Mat lb = log_values(kernel.basis, nodes);
  const Vec ip = weighted_covariance(lb, log_values({p}, nodes), nodes.weights).col(0);
  return linear_combination(kernel.weights * ip, kernel.basis);
}

BayesElement kernel_apply(const std::vector<BayesElement>& basis, const GaussianMeasure& nu,
                          const BayesElement& p, const QuadratureSpec& spec) {
  const NodeSet nodes = measure_nodes(nu, spec);
  return kernel_apply(projection_kernel(basis, nodes), p, nodes);
}

double kl(const BayesElement& q, const BayesElement& p, const QuadratureSpec& spec) {
  if (spec.kind != RuleKind::grid) throw ConfigError("kl needs a grid rule");
  const NodeSet nodes = density_nodes(q.phi_fn(), spec);
  const double lq = log_partition(q.phi_fn(), spec);
  const double lp = log_partition(p.phi_fn(), spec);
  return expect([&](const Vec& x) { return p.phi(x) - q.phi(x); }, nodes) + lp - lq;
}

namespace {

struct KlTerms {
  NodeSet nodes;
  Mat lb;     // ln b at nodes
  Vec resid;  // ln p - ln q at nodes (unnormalized)
};

KlTerms kl_terms(const Coordinates& alpha, const std::vector<BayesElement>& basis,
                 const BayesElement& p, const QuadratureSpec& spec) {
  if (spec.kind != RuleKind::grid) throw ConfigError("KL derivatives need a grid rule");
  const BayesElement q = reconstruct(alpha, basis);
  KlTerms t{density_nodes(q.phi_fn(), spec), {}, {}};
  t.lb = log_values(basis, t.nodes);
  t.resid = log_values({subtract(p, q)}, t.nodes).col(0);
  return t;
}

// Weighted centering of each column.
Mat centered(const Mat& a, const Vec& w) {
  const Eigen::RowVectorXd mean = w.transpose() * a;
  return a.rowwise() - mean;
}

}  // namespace

Vec kl_gradient(const Coordinates& alpha, const std::vector<BayesElement>& basis,
                const BayesElement& p, const QuadratureSpec& spec) {
  const KlTerms t = kl_terms(alpha, basis, p, spec);
  return -weighted_covariance(t.lb, t.resid, t.nodes.weights).col(0);
}

Mat kl_hessian(const Coordinates& alpha, const std::vector<BayesElement>& basis,
               const BayesElement& p, const QuadratureSpec& spec, HessianForm form) {
  const KlTerms t = kl_terms(alpha, basis, p, spec);
  const Vec& w = t.nodes.weights;
  const Mat g = weighted_covariance(t.lb, t.lb, w);
  const Mat lc = centered(t.lb, w);
  const auto m = lc.cols();
  Mat h(m, m);
  if (form == HessianForm::symmetric) {
    const Vec rc = centered(t.resid, w).col(0);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b <= a; ++b)
        h(a, b) = h(b, a) = g(a, b) - (w.array() * lc.col(a).array() * lc.col(b).array() *
                                       rc.array()).sum();
    return h;
  }
  // Normalized ln p - ln q on the same grid, so that E_q of it is -KL.
  const BayesElement q = reconstruct(alpha, basis);
  const double shift = log_partition(p.phi_fn(), spec) - log_partition(q.phi_fn(), spec);
  const Vec r = t.resid.array() - shift;
  const double kl_value = -w.dot(r);
  for (Eigen::Index a = 0; a < m; ++a) {
    const Mat fr = lc.col(a).cwiseProduct(r);
    const Vec cov = weighted_covariance(t.lb, fr, w).col(0);
    h.col(a) = (1.0 - kl_value) * g.col(a) - cov;
  }
  return h;
}

double measure_derivative_ip(const BayesElement& p, const BayesElement& q,
                             const BayesElement& direction, const NodeSet& nu) {
  const Vec& w = nu.weights;
  const Mat lp = log_values({p}, nu);
  const Mat lq = log_values({q}, nu);
  const Mat lb = log_values({direction}, nu);
  const Mat f = centered(lb, w);
  const Mat fq = f.cwiseProduct(lq);
  const double e_lq = w.dot(lq.col(0));
  return weighted_covariance(lp, fq, w)(0, 0) - e_lq * weighted_covariance(lb, lp, w)(0, 0);
}

Mat fim(const std::vector<BayesElement>& basis, const NodeSet& nodes, const Mat& jacobian) {
  const Mat g = gram(basis, nodes);
  if (jacobian.rows() != g.rows())
    throw DimensionMismatch("fim: Jacobian rows do not match the basis size");
  return jacobian.transpose() * g * jacobian;
}

Mat fim(const std::vector<BayesElement>& basis, const GaussianMeasure& nu, const Mat& jacobian,
        const QuadratureSpec& spec) {
  return fim(basis, measure_nodes(nu, spec), jacobian);
}

std::vector<BayesElement> subspace_basis(SubspaceKind kind, int order,
                                         const GaussianMeasure& measure) {
  if (kind == SubspaceKind::gaussian) return gaussian_basis(measure).elements();
  return HermiteBasis1D(order, measure).elements();
}

namespace {

QuadratureSpec report_grid(const GaussianMeasure& init, const GaussianMeasure& g,
                           const IterateOptions& opts) {
  const double w = opts.report_half_width;
  const double a = std::sqrt(init.covariance()(0, 0));
  const double b = std::sqrt(g.covariance()(0, 0));
  const double lo = std::min(init.mean()(0) - w * a, g.mean()(0) - w * b);
  const double hi = std::max(init.mean()(0) + w * a, g.mean()(0) + w * b);
  return QuadratureSpec::grid({{lo, hi}}, opts.report_nodes);
}

// Widens `grid` about its centre until p decays at both edges, so that p's
// normalizer is not truncated. Gives up after a fixed number of widenings.
QuadratureSpec fit_grid(const BayesElement& p, QuadratureSpec grid) {
  constexpr int kWidenings = 4;
  for (int k = 0;; ++k) {
    try {
      log_partition(p.phi_fn(), grid);
      return grid;
    } catch (const NotNormalizable&) {
      if (k == kWidenings) throw;
    }
    for (auto& iv : grid.grid_bounds) {
      const double c = 0.5 * (iv.lo + iv.hi);
      const double h = 0.75 * (iv.hi - iv.lo);
      iv = {c - h, c + h};
    }
  }
}

// Safeguarded Newton step on KL from `previous`: the Gram step replaces an
// indefinite Hessian, and the step is halved until KL decreases.
Coordinates newton_step(const Coordinates& previous, const Coordinates& gram_step_target,
                        const std::vector<BayesElement>& basis, const BayesElement& p,
                        const QuadratureSpec& grid) {
  const Vec grad = kl_gradient(previous, basis, p, grid);
  const Mat hess = kl_hessian(previous, basis, p, grid);
  Eigen::LLT<Mat> llt(hess);
  const Vec dir = llt.info() == Eigen::Success ? Vec(-llt.solve(grad))
                                               : Vec(gram_step_target - previous);
  const double k0 = kl(reconstruct(previous, basis), p, grid);
  const double slope = grad.dot(dir);
  double t = 1.0;
  for (int halvings = 0; halvings < 30; ++halvings, t *= 0.5) {
    try {
      const double k = kl(reconstruct(previous + t * dir, basis), p, grid);
      if (k <= k0 + 1e-4 * t * slope) break;
    } catch (const NotNormalizable&) {
      // Candidate fell off the normalizable cone; shorten.
    }
  }
  return previous + t * dir;
}

// Gaussian part of a 1D element, read off in the basis of `measure` with
// degree-1 and degree-2 coordinates (a1, a2).
GaussianMeasure gaussian_from_pair(double a1, double a2, const GaussianMeasure& measure) {
  if (!(a2 > 0.0))
    throw MeasureInvalid("estimate has non-positive quadratic coordinate " + std::to_string(a2));
  GaussianCoordinates c{Vec::Constant(1, a1), Vec::Constant(1, a2)};
  const IndefGaussian g = from_coordinates(c, measure);
  return GaussianMeasure(g.mean, g.info.inverse());
}

// Projection of a non-Gaussian 1D estimate onto G using the normalized
// estimate itself as the measure.
GaussianMeasure gaussian_part(const BayesElement& estimate, const GaussianMeasure& measure,
                              const QuadratureSpec& grid) {
  const NodeSet nodes = density_nodes(estimate.phi_fn(), grid);
  const std::vector<BayesElement> g = gaussian_basis(measure).elements();
  const Vec c = project(estimate, g, nodes);
  return gaussian_from_pair(c(0), c(1), measure);
}

}  // namespace

IterationTrace iterate(const BayesElement& p, const GaussianMeasure& init,
                       const IterateOptions& opts) {
  if (opts.max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(opts.tol > 0.0)) throw ConfigError("tol must be positive");
  if (p.dim() != init.dim()) throw DimensionMismatch("iterate: element and measure dimensions differ");
  if (opts.subspace == SubspaceKind::hermite) {
    if (init.dim() != 1) throw ConfigError("Hermite iteration is one-dimensional");
    if (opts.order < 2) throw ConfigError("Hermite iteration needs at least two basis functions");
  }
  const bool one_d = init.dim() == 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  IterationTrace trace;
  GaussianMeasure measure = init;
  BayesElement estimate = BayesElement::gaussian(init);
  double last_kl = nan;
  for (int i = 0; i < opts.max_iters; ++i) {
    try {
      const std::vector<BayesElement> basis = subspace_basis(opts.subspace, opts.order, measure);
      const QuadratureSpec spec = opts.rule ? opts.rule(measure) : opts.spec;
      const NodeSet nodes = measure_nodes(measure, spec);
      Coordinates alpha;
      Coordinates previous;
      if (opts.subspace == SubspaceKind::gaussian) {
        alpha = gaussian_coordinates(p, measure, spec).stacked();
        previous = gaussian_coordinates(estimate, measure, spec).stacked();
      } else {
        alpha = project(p, basis, nodes);
        previous = project(estimate, basis, nodes);
      }
      if (opts.full_newton)
        alpha = newton_step(previous, alpha, basis, p, fit_grid(p, report_grid(init, measure, opts)));
      if (!alpha.allFinite()) throw NumericalError("non-finite coordinates");
      const double step_norm = (alpha - previous).norm();

      BayesElement next_estimate = reconstruct(alpha, basis);
      GaussianMeasure next = measure;
      if (opts.subspace == SubspaceKind::gaussian) {
        const IndefGaussian g = from_coordinates(
            {alpha.head(init.dim()), alpha.tail(alpha.size() - init.dim())}, measure);
        if (!g.positive_definite) throw MeasureInvalid("Gaussian estimate is not positive definite");
        next = g.measure();
        next_estimate = BayesElement::gaussian(next);
      } else if (opts.order == 2) {
        next = gaussian_from_pair(alpha(0), alpha(1), measure);
        next_estimate = BayesElement::gaussian(next);
      } else {
        next = gaussian_part(next_estimate, measure, report_grid(init, measure, opts));
      }

      IterationStep step{alpha, measure, next, step_norm, nan, nan};
      if (opts.report && one_d) {
        step.kl = kl(next_estimate, p, fit_grid(p, report_grid(init, next, opts)));
        step.divergence = divergence(p, next_estimate, nodes);
        if (!std::isfinite(step.kl)) throw NumericalError("KL is not finite");
        if (std::isfinite(last_kl) && step.kl > last_kl) trace.kl_non_monotone = true;
        last_kl = step.kl;
      }
      trace.steps.push_back(step);
      measure = next;
      estimate = next_estimate;
      if (step_norm < opts.tol) {
        trace.converged = true;
        break;
      }
    } catch (const NumericalError& e) {
      trace.error = e.what();
      break;
    }
  }
  return trace;
}

}  // namespace bh
