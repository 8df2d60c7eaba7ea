#include "cspcr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cspcr/dataset.hpp"
#include "cspcr/prng.hpp"

namespace cspcr {

std::pair<Eigen::VectorXd, Eigen::VectorXd> weighted_label_sums(
    const std::vector<int>& labels, const Eigen::VectorXd& weights, int L) {
  if (static_cast<Eigen::Index>(labels.size()) != weights.size())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "labels and weights have different lengths");
  Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(L);
  Eigen::VectorXd d_sum = Eigen::VectorXd::Zero(L);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int l = labels[j];
    if (l < 1 || l > L)
      throw ValidationError(ValidationError::Kind::other,
                            "label outside [1, L] at row " + std::to_string(j));
    const double w = weights[static_cast<Eigen::Index>(j)];
    w_sum[l - 1] += w;
    d_sum[l - 1] += w * w;
  }
  return {std::move(w_sum), std::move(d_sum)};
}

CovMatrix omega_hat(const Eigen::VectorXd& D, int n, int L) {
  Eigen::MatrixXd omega =
      Eigen::MatrixXd::Constant(L, L, -1.0 / static_cast<double>(L));
  omega.diagonal() += (static_cast<double>(L) / n) * D;
  return CovMatrix(omega);
}

double u_statistic(const Eigen::VectorXd& W, int n, int L) {
  const double center = static_cast<double>(n) / L;
  return (static_cast<double>(L) / n) * (W.array() - center).square().sum();
}

double fit_gamma(const std::vector<int>& labels, const Eigen::VectorXd& weights,
                 const Eigen::VectorXd& a_values, int label,
                 GammaEstimator estimator) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n < 2)
    throw ValidationError(ValidationError::Kind::other, "fit_gamma needs n >= 2");

  if (estimator == GammaEstimator::covariance_ratio) {
    // Plug-in of the optimal coefficient:
    // Cov(w 1{l_j = label}, w a) / Var(w a).
    double mean_wi = 0.0, mean_wa = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = weights[j];
      mean_wi += w * (labels[static_cast<std::size_t>(j)] == label ? 1.0 : 0.0);
      mean_wa += w * a_values[j];
    }
    mean_wi /= static_cast<double>(n);
    mean_wa /= static_cast<double>(n);
    double cov = 0.0, var = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = weights[j];
      const double wi =
          w * (labels[static_cast<std::size_t>(j)] == label ? 1.0 : 0.0) - mean_wi;
      const double wa = w * a_values[j] - mean_wa;
      cov += wi * wa;
      var += wa * wa;
    }
    cov /= static_cast<double>(n - 1);
    var /= static_cast<double>(n - 1);
    if (var < 1e-12) return 0.0;
    return cov / var;
  }

  // Weighted least squares slope of 1{l_j = label} on a, weights w, with
  // intercept.
  double sw = 0.0, swa = 0.0, swi = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    sw += weights[j];
    swa += weights[j] * a_values[j];
    swi += weights[j] * (labels[static_cast<std::size_t>(j)] == label ? 1.0 : 0.0);
  }
  if (sw <= 0.0) return 0.0;
  const double abar = swa / sw;
  const double ibar = swi / sw;
  double num = 0.0, den = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double da = a_values[j] - abar;
    const double di =
        (labels[static_cast<std::size_t>(j)] == label ? 1.0 : 0.0) - ibar;
    num += weights[j] * da * di;
    den += weights[j] * da * da;
  }
  if (den < 1e-12) return 0.0;
  return num / den;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> enhanced_sums(
    const std::vector<int>& labels, const Eigen::VectorXd& weights,
    const Eigen::VectorXd& a_values, const Eigen::VectorXd& gamma,
    double a_target_mean, int n, int L) {
  if (static_cast<int>(labels.size()) != n || weights.size() != n ||
      a_values.size() != n || gamma.size() != L)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "enhanced_sums: inconsistent dimensions");
  Eigen::MatrixXd contrib(L, n);
  for (int j = 0; j < n; ++j) {
    const double w = weights[j];
    const double a = a_values[j];
    const int lj = labels[static_cast<std::size_t>(j)];
    for (int l = 0; l < L; ++l) {
      const double ind = (lj == l + 1) ? 1.0 : 0.0;
      contrib(l, j) = w * (ind - gamma[l] * a) + gamma[l] * a_target_mean;
    }
  }
  Eigen::VectorXd w_tilde = contrib.rowwise().sum();
  return {std::move(w_tilde), std::move(contrib)};
}

CovMatrix omega_tilde(const Eigen::MatrixXd& contributions, int n, int L) {
  if (contributions.rows() != L || contributions.cols() != n)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "omega_tilde: contribution matrix must be L x n");
  const Eigen::MatrixXd centered =
      contributions.array() - 1.0 / static_cast<double>(L);
  Eigen::MatrixXd omega =
      (static_cast<double>(L) / n) * (centered * centered.transpose());
  return CovMatrix(omega);
}

double estimate_target_mean_a(const UnlabeledPool& target_pool,
                              const ControlVariateFn& a) {
  if (target_pool.population() != Population::target)
    throw ValidationError(ValidationError::Kind::other,
                          "estimate_target_mean_a: pool is not tagged target");
  if (target_pool.n() < 1)
    throw ValidationError(ValidationError::Kind::empty, "target pool is empty");
  double acc = 0.0;
  for (int i = 0; i < target_pool.n(); ++i)
    acc += a(target_pool.x()[i], target_pool.z_row(i), target_pool.v_row(i));
  return acc / target_pool.n();
}

namespace {

Eigen::VectorXd evaluate_weights(const SourceDataset& dataset,
                                 const RatioModel& ratio) {
  Eigen::VectorXd w(dataset.n());
  for (int j = 0; j < dataset.n(); ++j)
    w[j] = ratio(dataset.x()[j], dataset.z_row(j), dataset.v_row(j));
  return w;
}

Diagnostics weight_diagnostics(const Eigen::VectorXd& w,
                               std::uint64_t clamp_count) {
  Diagnostics d;
  d.weight_mean = w.mean();
  d.weight_max = w.maxCoeff();
  const double sum = w.sum();
  const double sq = w.squaredNorm();
  d.ess = sq > 0.0 ? sum * sum / sq : 0.0;
  d.clamp_count = clamp_count;
  return d;
}

// Threshold, p-value and decision from one spectral law. The p-value and the
// threshold come from the same CDF; the bisection tolerance (1e-8) can leave
// them inconsistent exactly at the boundary, so p is nudged onto the side the
// decision is on.
void finalize(TestReport& report, const CovMatrix& omega) {
  report.spectral = spectral_weights(omega);
  if (report.spectral.all_zero())
    throw DegenerateNullError(
        "estimated covariance has no positive spectrum; "
        "no decision can be made");
  report.threshold = gchisq_quantile(report.spectral, 1.0 - report.alpha);
  report.p_value = 1.0 - gchisq_cdf(report.spectral, report.statistic);
  report.reject = report.statistic >= report.threshold;
  if (report.reject)
    report.p_value = std::min(report.p_value, report.alpha);
  else
    report.p_value =
        std::max(report.p_value, std::nextafter(report.alpha, 2.0));
}

TestReport base_report(const SourceDataset& dataset, const TestConfig& config,
                       Method method) {
  TestReport r;
  r.method = method;
  r.n = dataset.n();
  r.K = config.K;
  r.L = config.L;
  r.alpha = config.alpha;
  r.seed = config.seed;
  return r;
}

TestReport run_weighted(const SourceDataset& dataset,
                        const Eigen::VectorXd& weights,
                        const ConditionalSampler& sampler,
                        const StatisticFn& statistic, const TestConfig& config,
                        Method method, std::uint64_t clamp_count) {
  config.validate(dataset.n());
  validate_dataset(dataset);
  if (weights.size() != dataset.n())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "weight vector length does not match dataset");

  TestReport report = base_report(dataset, config, method);
  const LabelAssignment assignment =
      assign_labels(dataset, sampler, statistic, config.K, config.L, config.seed);
  auto [w_sum, d_sum] = weighted_label_sums(assignment.labels, weights, config.L);
  report.per_label.W = std::move(w_sum);
  report.per_label.D = std::move(d_sum);
  report.statistic = u_statistic(report.per_label.W, report.n, config.L);
  report.diagnostics = weight_diagnostics(weights, clamp_count);
  finalize(report, omega_hat(report.per_label.D, report.n, config.L));
  return report;
}

TestReport run_weighted_pe(const SourceDataset& dataset,
                           const Eigen::VectorXd& weights,
                           const ConditionalSampler& sampler,
                           const StatisticFn& statistic,
                           const ControlVariateFn& control_variate,
                           const UnlabeledPool* target_pool,
                           const TestConfig& config, std::uint64_t clamp_count) {
  config.validate(dataset.n());
  validate_dataset(dataset);
  if (weights.size() != dataset.n())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "weight vector length does not match dataset");

  double a_target_mean;
  if (config.a_target_mean) {
    a_target_mean = *config.a_target_mean;
  } else {
    if (!target_pool)
      throw ValidationError(ValidationError::Kind::other,
                            "power enhancement needs a target pool or an exact "
                            "E_T[a] in the configuration");
    a_target_mean = estimate_target_mean_a(*target_pool, control_variate);
  }

  TestReport report = base_report(dataset, config, Method::cspcr_pe);
  const int n = dataset.n();
  const int L = config.L;
  const LabelAssignment assignment =
      assign_labels(dataset, sampler, statistic, config.K, L, config.seed);

  Eigen::VectorXd a_values(n);
  for (int j = 0; j < n; ++j) {
    a_values[j] =
        control_variate(dataset.x()[j], dataset.z_row(j), dataset.v_row(j));
    if (!std::isfinite(a_values[j]))
      throw ValidationError(ValidationError::Kind::non_finite,
                            "control variate returned a non-finite value", j,
                            "control_variate");
  }

  auto [w_sum, d_sum] = weighted_label_sums(assignment.labels, weights, L);
  report.per_label.W = std::move(w_sum);
  report.per_label.D = std::move(d_sum);

  Eigen::VectorXd gamma(L);
  for (int l = 1; l <= L; ++l)
    gamma[l - 1] = fit_gamma(assignment.labels, weights, a_values, l,
                             config.gamma_estimator);

  auto [w_tilde, contrib] = enhanced_sums(assignment.labels, weights, a_values,
                                          gamma, a_target_mean, n, L);
  report.per_label.gamma = std::move(gamma);
  report.per_label.a_target_mean = a_target_mean;
  report.statistic = u_statistic(w_tilde, n, L);
  report.per_label.W_tilde = std::move(w_tilde);
  report.diagnostics = weight_diagnostics(weights, clamp_count);
  const CovMatrix omega = omega_tilde(contrib, n, L);
  report.per_label.contributions = std::move(contrib);
  finalize(report, omega);
  return report;
}

// Sequential weighted sampling without replacement, probabilities
// proportional to w. Selected indices are returned in dataset order.
std::vector<int> weighted_sample_without_replacement(
    const Eigen::VectorXd& weights, int m, std::mt19937_64& rng) {
  const auto n = static_cast<int>(weights.size());
  std::vector<double> w(weights.data(), weights.data() + n);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (total <= 0.0)
    throw ValidationError(ValidationError::Kind::other,
                          "importance resampling: all weights are zero");
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(m));
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int pick = 0; pick < m; ++pick) {
    double u = unif(rng) * total;
    int chosen = -1;
    for (int i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      u -= w[static_cast<std::size_t>(i)];
      if (u <= 0.0) {
        chosen = i;
        break;
      }
    }
    if (chosen < 0) {  // numerical leftovers: take the last available row
      for (int i = n - 1; i >= 0; --i)
        if (!taken[static_cast<std::size_t>(i)]) {
          chosen = i;
          break;
        }
    }
    taken[static_cast<std::size_t>(chosen)] = true;
    total -= w[static_cast<std::size_t>(chosen)];
    selected.push_back(chosen);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

}  // namespace

TestReport run_cspcr(const SourceDataset& dataset, const RatioModel& ratio,
                     const ConditionalSampler& sampler,
                     const StatisticFn& statistic, const TestConfig& config) {
  validate_dataset(dataset);
  const std::uint64_t clamps_before = ratio.clamp_count();
  const Eigen::VectorXd w = evaluate_weights(dataset, ratio);
  return run_weighted(dataset, w, sampler, statistic, config, Method::cspcr,
                      ratio.clamp_count() - clamps_before);
}

TestReport run_cspcr(const SourceDataset& dataset,
                     const Eigen::VectorXd& weights,
                     const ConditionalSampler& sampler,
                     const StatisticFn& statistic, const TestConfig& config) {
  return run_weighted(dataset, weights, sampler, statistic, config,
                      Method::cspcr, 0);
}

TestReport run_cspcr_pe(const SourceDataset& dataset, const RatioModel& ratio,
                        const ConditionalSampler& sampler,
                        const StatisticFn& statistic,
                        const ControlVariateFn& control_variate,
                        const UnlabeledPool* target_pool,
                        const TestConfig& config) {
  validate_dataset(dataset);
  const std::uint64_t clamps_before = ratio.clamp_count();
  const Eigen::VectorXd w = evaluate_weights(dataset, ratio);
  return run_weighted_pe(dataset, w, sampler, statistic, control_variate,
                         target_pool, config,
                         ratio.clamp_count() - clamps_before);
}

TestReport run_cspcr_pe(const SourceDataset& dataset,
                        const Eigen::VectorXd& weights,
                        const ConditionalSampler& sampler,
                        const StatisticFn& statistic,
                        const ControlVariateFn& control_variate,
                        const UnlabeledPool* target_pool,
                        const TestConfig& config) {
  return run_weighted_pe(dataset, weights, sampler, statistic, control_variate,
                         target_pool, config, 0);
}

TestReport run_pcr(const SourceDataset& dataset,
                   const ConditionalSampler& sampler,
                   const StatisticFn& statistic, const TestConfig& config) {
  config.validate(dataset.n());
  validate_dataset(dataset);

  TestReport report = base_report(dataset, config, Method::pcr);
  const int L = config.L;
  const LabelAssignment assignment =
      assign_labels(dataset, sampler, statistic, config.K, L, config.seed);
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(dataset.n());
  auto [w_sum, d_sum] = weighted_label_sums(assignment.labels, unit, L);
  report.per_label.W = std::move(w_sum);
  report.per_label.D = std::move(d_sum);
  report.statistic = u_statistic(report.per_label.W, report.n, L);
  report.diagnostics = weight_diagnostics(unit, 0);

  // Fixed population covariance of the no-shift test: the projection
  // I - (1/L) J, whose spectral law is chi-squared with L-1 df.
  Eigen::MatrixXd omega =
      Eigen::MatrixXd::Identity(L, L) -
      Eigen::MatrixXd::Constant(L, L, 1.0 / static_cast<double>(L));
  finalize(report, CovMatrix(omega));
  return report;
}

TestReport run_is(const SourceDataset& dataset, const Eigen::VectorXd& weights,
                  const ConditionalSampler& sampler,
                  const StatisticFn& statistic, const TestConfig& config) {
  config.validate(dataset.n());
  validate_dataset(dataset);
  if (weights.size() != dataset.n())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "weight vector length does not match dataset");

  const int m = config.resample_size(dataset.n());
  if (m > dataset.n())
    throw ValidationError(ValidationError::Kind::other,
                          "m_resample exceeds the dataset size");
  auto rng = make_rng(config.seed, Stream::resample);
  const std::vector<int> rows =
      weighted_sample_without_replacement(weights, m, rng);
  TestReport report = run_pcr(dataset.subset(rows), sampler, statistic, config);
  report.method = Method::is;
  report.diagnostics.clamp_count = 0;
  return report;
}

TestReport run_is(const SourceDataset& dataset, const RatioModel& ratio,
                  const ConditionalSampler& sampler,
                  const StatisticFn& statistic, const TestConfig& config) {
  validate_dataset(dataset);
  const Eigen::VectorXd w = evaluate_weights(dataset, ratio);
  return run_is(dataset, w, sampler, statistic, config);
}

}  // namespace cspcr
