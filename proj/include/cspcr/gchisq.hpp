#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "cspcr/types.hpp"

namespace cspcr {

// Symmetric L x L covariance matrix; stores (M + M^T)/2 of the input.
class CovMatrix {
 public:
  explicit CovMatrix(const Eigen::MatrixXd& m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

// Eigenvalues of a covariance matrix, defining the null law of
// A = x^T x for x ~ N(0, Omega) as the weighted chi-squared sum
// sum_i lambda_i * chisq_1. Sample covariances can be indefinite; negative
// eigenvalues are clipped to zero and their magnitude accumulated in
// clipped_mass rather than failing.
struct SpectralWeights {
  Eigen::VectorXd lambdas;  // nonincreasing, every entry >= 0
  double clipped_mass = 0.0;

  bool all_zero() const { return lambdas.size() == 0 || lambdas.maxCoeff() <= 0.0; }
};

// Eigenvalues of the symmetrized matrix, clipped at
// eps = 1e-10 * max(1, largest |eigenvalue|).
SpectralWeights spectral_weights(const CovMatrix& omega);

// P(sum_i lambda_i chisq_1 <= x), by three-cumulant moment matching to a
// shifted gamma law (c1 = sum l, c2 = 2 sum l^2, c3 = 8 sum l^3).
// Throws DegenerateNullError when all weights are zero.
double gchisq_cdf(const SpectralWeights& weights, double x);

// x with |gchisq_cdf(x) - prob| <= 1e-8, by bracketing + bisection.
double gchisq_quantile(const SpectralWeights& weights, double prob);

// Empirical prob-quantile of sum_i lambda_i g_i^2 over `draws` standard
// normal vectors; deterministic given seed. Validation oracle for the
// moment-matched path. Requires draws >= 10^4.
double mc_quantile(const SpectralWeights& weights, double prob,
                   std::int64_t draws, std::uint64_t seed);

}  // namespace cspcr
