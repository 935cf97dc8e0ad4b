#include "bh/linalg.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "bh/errors.hpp"

namespace bh {

Mat cholesky_lower(const Mat& a, const char* context) {
  if (a.rows() != a.cols()) throw DimensionMismatch("cholesky of a non-square matrix");
  const Eigen::Index n = a.rows();
  Mat l = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) throw NonSpd(context, static_cast<long>(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

bool is_symmetric(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

Vec vec(const Mat& a) { return Eigen::Map<const Vec>(a.data(), a.size()); }

Mat unvec(const Vec& v, Eigen::Index n) {
  if (v.size() != n * n) throw DimensionMismatch("unvec: length is not n^2");
  return Eigen::Map<const Mat>(v.data(), n, n);
}

Vec vech(const Mat& a) {
  const Eigen::Index n = a.rows();
  Vec out(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) out(k++) = a(i, j);
  return out;
}

Eigen::Index vech_side(Eigen::Index len) {
  const auto n = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0));
  if (n * (n + 1) / 2 != len) throw DimensionMismatch("vech length is not triangular");
  return n;
}

Mat unvech(const Vec& v) {
  const Eigen::Index n = vech_side(v.size());
  Mat out(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      out(i, j) = v(k);
      out(j, i) = v(k);
      ++k;
    }
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double condition_number_symmetric(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  const Vec ev = es.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / lo;
}

}  // namespace bh
