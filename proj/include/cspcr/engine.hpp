#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>

#include "cspcr/gchisq.hpp"
#include "cspcr/randomize.hpp"
#include "cspcr/types.hpp"

namespace cspcr {

// Per-label weighted sums. Every sample contributes its full weight to
// exactly one label, so sum_l W_l == sum_j w_j.
struct LabelSummary {
  Eigen::VectorXd W;  // sum of l-labeled importance weights
  Eigen::VectorXd D;  // sum of l-labeled squared importance weights
  std::optional<Eigen::VectorXd> W_tilde;        // augmented sums
  std::optional<Eigen::VectorXd> gamma;          // fitted control coefficients
  std::optional<Eigen::MatrixXd> contributions;  // L x n per-sample matrix
  std::optional<double> a_target_mean;
};

struct Diagnostics {
  double weight_mean = 0.0;
  double weight_max = 0.0;
  double ess = 0.0;  // (sum w)^2 / sum w^2
  std::uint64_t clamp_count = 0;
};

struct TestReport {
  Method method = Method::cspcr;
  int n = 0, K = 0, L = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double statistic = 0.0;  // U
  double threshold = 0.0;  // theta
  double p_value = 1.0;
  bool reject = false;     // holds iff statistic >= threshold iff p <= alpha
  LabelSummary per_label;
  SpectralWeights spectral;
  Diagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Pipeline pieces (lines 9-14 of the base algorithm, lines 5-10 of the
// power-enhanced one).

// W_l = sum_j w_j 1{l_j = l}, D_l = sum_j w_j^2 1{l_j = l}.
std::pair<Eigen::VectorXd, Eigen::VectorXd> weighted_label_sums(
    const std::vector<int>& labels, const Eigen::VectorXd& weights, int L);

// (L/n) diag(D) - (1/L) J_L.
CovMatrix omega_hat(const Eigen::VectorXd& D, int n, int L);

// (L/n) sum_l (W_l - n/L)^2.
double u_statistic(const Eigen::VectorXd& W, int n, int L);

// Control-variate coefficient for label l: the plug-in covariance ratio
// Cov(w 1{l_j=l}, w a) / Var(w a), or the weighted-regression slope variant.
// Returns 0 when the denominator variance is below 1e-12.
double fit_gamma(const std::vector<int>& labels, const Eigen::VectorXd& weights,
                 const Eigen::VectorXd& a_values, int label,
                 GammaEstimator estimator = GammaEstimator::covariance_ratio);

// W~_l = sum_j w_j [1{l_j=l} - gamma_l a_j] + n gamma_l E_T[a], together with
// the L x n matrix of per-sample contributions
// w_j [1{l_j=l} - gamma_l a_j] + gamma_l E_T[a].
std::pair<Eigen::VectorXd, Eigen::MatrixXd> enhanced_sums(
    const std::vector<int>& labels, const Eigen::VectorXd& weights,
    const Eigen::VectorXd& a_values, const Eigen::VectorXd& gamma,
    double a_target_mean, int n, int L);

// (L/n) (M - J/L)(M - J/L)^T over the contribution matrix.
CovMatrix omega_tilde(const Eigen::MatrixXd& contributions, int n, int L);

// Sample mean of the control variate over a target pool.
double estimate_target_mean_a(const UnlabeledPool& target_pool,
                              const ControlVariateFn& a);

// ---------------------------------------------------------------------------
// Test runners. Each composes labeling, weighting, the spectral null law and
// the quantile threshold; reports are immutable and bit-reproducible for a
// fixed (dataset, config, seed). Throws DegenerateNullError when the
// estimated covariance has no positive spectrum.

TestReport run_cspcr(const SourceDataset& dataset, const RatioModel& ratio,
                     const ConditionalSampler& sampler,
                     const StatisticFn& statistic, const TestConfig& config);
TestReport run_cspcr(const SourceDataset& dataset,
                     const Eigen::VectorXd& weights,
                     const ConditionalSampler& sampler,
                     const StatisticFn& statistic, const TestConfig& config);

// Power-enhanced variant. E_T[a] comes from config.a_target_mean when set,
// otherwise from the target pool mean (the pool is then required).
TestReport run_cspcr_pe(const SourceDataset& dataset, const RatioModel& ratio,
                        const ConditionalSampler& sampler,
                        const StatisticFn& statistic,
                        const ControlVariateFn& control_variate,
                        const UnlabeledPool* target_pool,
                        const TestConfig& config);
TestReport run_cspcr_pe(const SourceDataset& dataset,
                        const Eigen::VectorXd& weights,
                        const ConditionalSampler& sampler,
                        const StatisticFn& statistic,
                        const ControlVariateFn& control_variate,
                        const UnlabeledPool* target_pool,
                        const TestConfig& config);

// No-shift baseline: unit weights, threshold from the fixed projection
// covariance I - (1/L) J (the chi-squared law with L-1 degrees of freedom),
// computed through the same spectral path.
TestReport run_pcr(const SourceDataset& dataset,
                   const ConditionalSampler& sampler,
                   const StatisticFn& statistic, const TestConfig& config);

// Importance-resampling comparator: draw config.resample_size(n) rows without
// replacement with probabilities proportional to the weights, then run the
// no-shift test on the resampled rows.
TestReport run_is(const SourceDataset& dataset, const RatioModel& ratio,
                  const ConditionalSampler& sampler,
                  const StatisticFn& statistic, const TestConfig& config);
TestReport run_is(const SourceDataset& dataset, const Eigen::VectorXd& weights,
                  const ConditionalSampler& sampler,
                  const StatisticFn& statistic, const TestConfig& config);

}  // namespace cspcr
