#include "bh/gaussian_subspace.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

#include "bh/errors.hpp"

namespace bh {

namespace {

// (row, col) pairs of the lower triangle in vech order.
std::vector<std::pair<Eigen::Index, Eigen::Index>> vech_pairs(Eigen::Index n) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index r = c; r < n; ++r) out.emplace_back(r, c);
  return out;
}

Mat lower_inverse(const Mat& l) {
  return l.triangularView<Eigen::Lower>().solve(Mat::Identity(l.rows(), l.cols()));
}

}  // namespace

DuplicationOps build_duplication(Eigen::Index n) {
  if (n < 1 || n > kMaxDuplicationDim)
    throw ConfigError("duplication matrix dimension must be in 1..64");
  const auto pairs = vech_pairs(n);
  const auto k = static_cast<Eigen::Index>(pairs.size());
  DuplicationOps ops;
  ops.n = n;
  ops.d = Mat::Zero(n * n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto [r, c] = pairs[static_cast<std::size_t>(j)];
    ops.d(r + c * n, j) = 1.0;
    ops.d(c + r * n, j) = 1.0;
  }
  const Mat dtd = ops.d.transpose() * ops.d;
  ops.d_dagger = dtd.ldlt().solve(ops.d.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * dtd);
  const Vec lam = eig.eigenvalues();
  ops.sqrt_half_dtd = eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  ops.inv_sqrt_half_dtd =
      eig.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return ops;
}

GaussianBasis::GaussianBasis(GaussianMeasure measure)
    : measure_(std::move(measure)), dup_(build_duplication(measure_.dim())) {
  const Eigen::Index n = measure_.dim();
  const Mat linv = lower_inverse(measure_.cholesky());
  const Vec mu = measure_.mean();
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec row = linv.row(k).transpose();
    elements_.emplace_back(
        n, [row, mu](const Vec& x) { return row.dot(x - mu); }, [row](const Vec&) { return row; },
        [n](const Vec&) { return Mat::Zero(n, n).eval(); });
  }
  // Each quadratic exponent is xi^T E xi with E symmetric; grad and Hessian in x follow.
  const auto pairs = vech_pairs(n);
  const auto k = static_cast<Eigen::Index>(pairs.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    Mat e = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double w = dup_.sqrt_half_dtd(j, i);
      if (w == 0.0) continue;
      const auto [r, c] = pairs[static_cast<std::size_t>(i)];
      if (r == c) {
        e(r, r) += w;
      } else {
        e(r, c) += 0.5 * w;
        e(c, r) += 0.5 * w;
      }
    }
    const Mat a = linv.transpose() * e * linv;
    elements_.emplace_back(
        n,
        [a, mu](const Vec& x) {
          const Vec d = x - mu;
          return d.dot(a * d);
        },
        [a, mu](const Vec& x) { return (2.0 * a * (x - mu)).eval(); },
        [a](const Vec&) { return (2.0 * a).eval(); });
  }
}

GaussianBasis gaussian_basis(const GaussianMeasure& measure) { return GaussianBasis(measure); }

Vec GaussianCoordinates::stacked() const {
  Vec out(alpha1.size() + alpha2.size());
  out << alpha1, alpha2;
  return out;
}

GaussianCoordinates gaussian_coordinates(const BayesElement& p, const GaussianMeasure& measure,
                                         const QuadratureSpec& spec) {
  if (p.dim() != measure.dim())
    throw DimensionMismatch("gaussian_coordinates: element and measure dimensions differ");
  const NodeSet nodes = measure_nodes(measure, spec);
  const Vec g = expect_vector([&](const Vec& x) { return p.gradient(x); }, nodes);
  const Mat h = expect_matrix([&](const Vec& x) { return p.hessian(x); }, nodes);
  const Mat& l = measure.cholesky();
  const DuplicationOps dup = build_duplication(measure.dim());
  GaussianCoordinates out;
  out.alpha1 = l.transpose() * g;
  const Mat lhl = l.transpose() * (0.5 * (h + h.transpose())) * l;
  out.alpha2 = dup.sqrt_half_dtd * vech(lhl);
  return out;
}

BayesElement IndefGaussian::element() const { return BayesElement::quadratic(mean, info); }

GaussianMeasure IndefGaussian::measure() const {
  const Mat l = cholesky_lower(info, "Gaussian information is not positive definite");
  const Mat linv = lower_inverse(l);
  return GaussianMeasure(mean, linv.transpose() * linv);
}

namespace {

constexpr double kMaxInformationCondition = 1e12;

IndefGaussian from_information(const Vec& mean, const Mat& info) {
  if (!is_symmetric(info)) throw NumericalError("Gaussian information is not symmetric");
  const Mat sym = 0.5 * (info + info.transpose());
  if (!(condition_number_symmetric(sym) <= kMaxInformationCondition))
    throw SingularInformation("Gaussian information is numerically singular");
  IndefGaussian out;
  out.mean = mean;
  out.info = sym;
  Eigen::LLT<Mat> llt(sym);
  out.positive_definite = llt.info() == Eigen::Success;
  return out;
}

}  // namespace

IndefGaussian from_coordinates(const GaussianCoordinates& alpha, const GaussianMeasure& measure) {
  const Eigen::Index n = measure.dim();
  if (alpha.alpha1.size() != n || alpha.alpha2.size() != n * (n + 1) / 2)
    throw DimensionMismatch("from_coordinates: coordinate lengths do not match the measure");
  const DuplicationOps dup = build_duplication(n);
  const Mat s = unvech(dup.inv_sqrt_half_dtd * alpha.alpha2);
  if (!(condition_number_symmetric(s) <= kMaxInformationCondition))
    throw SingularInformation("quadratic coordinates are numerically singular");
  const Mat& l = measure.cholesky();
  const Mat linv = lower_inverse(l);
  const Vec mean = measure.mean() - l * s.ldlt().solve(alpha.alpha1);
  return from_information(mean, linv.transpose() * s * linv);
}

IndefGaussian project_to_gaussian(const BayesElement& p, const GaussianMeasure& measure,
                                  const QuadratureSpec& spec) {
  if (p.dim() != measure.dim())
    throw DimensionMismatch("project_to_gaussian: element and measure dimensions differ");
  const NodeSet nodes = measure_nodes(measure, spec);
  const Vec g = expect_vector([&](const Vec& x) { return p.gradient(x); }, nodes);
  Mat h = expect_matrix([&](const Vec& x) { return p.hessian(x); }, nodes);
  h = 0.5 * (h + h.transpose());
  if (!(condition_number_symmetric(h) <= kMaxInformationCondition))
    throw SingularInformation("expected Hessian is numerically singular");
  return from_information(measure.mean() - h.ldlt().solve(g), h);
}

double gaussian_information(const IndefGaussian& g, const GaussianMeasure& measure,
                            GaussianInformationRoute route) {
  const Eigen::Index n = measure.dim();
  if (g.mean.size() != n || g.info.rows() != n)
    throw DimensionMismatch("gaussian_information: dimensions differ");
  cholesky_lower(g.info, "gaussian_information needs a positive-definite Gaussian");
  const Mat& p = g.info;
  const Mat& sigma = measure.covariance();
  const Vec& mu = measure.mean();
  switch (route) {
    case GaussianInformationRoute::coordinates: {
      const Mat& l = measure.cholesky();
      const DuplicationOps dup = build_duplication(n);
      const Vec a1 = l.transpose() * p * (mu - g.mean);
      const Vec a2 = dup.sqrt_half_dtd * vech(l.transpose() * p * l);
      return 0.5 * (a1.squaredNorm() + a2.squaredNorm());
    }
    case GaussianInformationRoute::trace: {
      const Vec d = mu - g.mean;
      const Mat psp = p * sigma * p;
      return 0.5 * (d.dot(psp * d) + 0.5 * (psp * sigma).trace());
    }
    case GaussianInformationRoute::quadratic_form: {
      const Mat one = Mat::Identity(n, n);
      const Mat mu_row_kron = kron(mu.transpose(), one);  // n x n^2
      Mat m(n + n * n, n + n * n);
      m.topLeftCorner(n, n) = sigma;
      m.topRightCorner(n, n * n) = -sigma * mu_row_kron;
      m.bottomLeftCorner(n * n, n) = -mu_row_kron.transpose() * sigma;
      m.bottomRightCorner(n * n, n * n) =
          0.5 * kron(sigma, sigma) + mu_row_kron.transpose() * sigma * mu_row_kron;
      Vec v(n + n * n);
      v << p * g.mean, vec(p);
      return 0.5 * v.dot(m * v);
    }
  }
  throw Error("unknown Gaussian information route");
}

}  // namespace bh
