#pragma once

#include <vector>

#include "bh/bayes.hpp"

namespace bh {

/// Duplication matrix D with D vech(A) = vec(A) for symmetric A, its
/// pseudoinverse, and the square root of 1/2 D^T D (and its inverse).
struct DuplicationOps {
  Eigen::Index n = 0;
  Mat d;
  Mat d_dagger;
  Mat sqrt_half_dtd;
  Mat inv_sqrt_half_dtd;
};

inline constexpr Eigen::Index kMaxDuplicationDim = 64;

DuplicationOps build_duplication(Eigen::Index n);

/// Orthonormal basis of the indefinite-Gaussian subspace under `measure`:
/// N linear elements with exponents L^{-1}(x - mu), followed by N(N+1)/2
/// quadratic ones with exponents sqrt(1/2 D^T D) vech(xi xi^T).
class GaussianBasis {
 public:
  explicit GaussianBasis(GaussianMeasure measure);

  Eigen::Index dim() const noexcept { return measure_.dim(); }
  Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(elements_.size()); }
  const GaussianMeasure& measure() const noexcept { return measure_; }
  const DuplicationOps& duplication() const noexcept { return dup_; }
  const std::vector<BayesElement>& elements() const noexcept { return elements_; }

 private:
  GaussianMeasure measure_;
  DuplicationOps dup_;
  std::vector<BayesElement> elements_;
};

GaussianBasis gaussian_basis(const GaussianMeasure& measure);

struct GaussianCoordinates {
  Vec alpha1;
  Vec alpha2;

  /// [alpha1; alpha2], the order used by GaussianBasis::elements().
  Vec stacked() const;
};

/// Coordinates of p in the Gaussian basis of `measure`, from expected
/// derivatives of phi.
GaussianCoordinates gaussian_coordinates(const BayesElement& p, const GaussianMeasure& measure,
                                         const QuadratureSpec& spec);

/// Element of G in information form:
/// phi(x) = 1/2 (x - mean)^T info (x - mean), info possibly indefinite.
struct IndefGaussian {
  Vec mean;
  Mat info;
  bool positive_definite = false;

  BayesElement element() const;
  /// The corresponding measure; throws NonSpd when info is not positive definite.
  GaussianMeasure measure() const;
};

/// Inverse of gaussian_coordinates: S = unvech(sqrt(1/2 D^T D)^{-1} alpha2),
/// mean = mu - L S^{-1} alpha1, info = L^{-T} S L^{-1}. Throws
/// SingularInformation when S is numerically singular.
IndefGaussian from_coordinates(const GaussianCoordinates& alpha, const GaussianMeasure& measure);

/// Projection of p onto G under `measure`: info = E[d2 phi], info (mean - mu) = -E[d phi].
IndefGaussian project_to_gaussian(const BayesElement& p, const GaussianMeasure& measure,
                                  const QuadratureSpec& spec);

enum class GaussianInformationRoute { coordinates, trace, quadratic_form };

/// I(g) under `measure` for an SPD Gaussian g. The three routes are
/// algebraically identical.
double gaussian_information(const IndefGaussian& g, const GaussianMeasure& measure,
                            GaussianInformationRoute route = GaussianInformationRoute::trace);

}  // namespace bh
