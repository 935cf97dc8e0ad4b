#pragma once

#include <Eigen/Dense>

namespace bh {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Lower-triangular Cholesky factor of a symmetric matrix. Throws NonSpd
/// naming the first non-positive pivot.
Mat cholesky_lower(const Mat& a, const char* context = "matrix is not positive definite");

/// True when `a` is symmetric to `tol` relative to its largest entry.
bool is_symmetric(const Mat& a, double tol = 1e-12);

/// Column-stacking vectorization.
Vec vec(const Mat& a);
/// Inverse of vec for an n x n result.
Mat unvec(const Vec& v, Eigen::Index n);
/// Half-vectorization: the lower triangle stacked column by column.
Vec vech(const Mat& a);
/// Symmetric matrix with the given half-vectorization.
Mat unvech(const Vec& v);
/// Side length n such that n(n+1)/2 == len. Throws DimensionMismatch otherwise.
Eigen::Index vech_side(Eigen::Index len);

Mat kron(const Mat& a, const Mat& b);

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix; infinity
/// when the smallest is zero.
double condition_number_symmetric(const Mat& a);

}  // namespace bh
