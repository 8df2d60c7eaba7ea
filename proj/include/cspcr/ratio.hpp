#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cspcr/types.hpp"

namespace cspcr {

// ---------------------------------------------------------------------------
// Linear-Gaussian conditional model: response | features ~ N(intercept +
// coefficients . features, noise_variance). Coefficients are on the raw
// (unstandardized) feature scale.
struct GaussianLinearModel {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double noise_variance = 1.0;  // > 0
};

double predict(const GaussianLinearModel& model, std::span<const double> features);
double predict(const GaussianLinearModel& model, const Eigen::VectorXd& features);

// Per-feature centering and scaling applied before coordinate descent.
struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population sd; 1 for constant columns
};

struct ElasticNetFit {
  GaussianLinearModel model;
  double lambda_chosen = 0.0;   // element of lambda_grid
  double mixing = 0.5;          // 1 = lasso, 0 = ridge
  int cv_folds = 0;
  Standardization standardization;
  Eigen::VectorXd lambda_grid;
  std::vector<double> cv_errors;  // mean CV MSE per grid entry
  bool converged = true;
};

// Result of one coordinate-descent solve on standardized data.
struct CdResult {
  Eigen::VectorXd beta;
  bool converged = false;
  int sweeps = 0;
};

// Minimizes (1/2n)||y - X b||^2 + lambda (mixing |b|_1 + (1-mixing)/2 |b|_2^2)
// by cyclic coordinate descent. X must have unit-variance centered columns and
// y must be centered. Stops when the largest coordinate update drops below
// 1e-7 or after 10^5 sweeps. When `objective_trace` is non-null the objective
// is recorded once per sweep (it never increases).
CdResult coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double lambda, double mixing,
                            Eigen::VectorXd beta_start,
                            std::vector<double>* objective_trace = nullptr);

double elastic_net_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta, double lambda,
                             double mixing);

// Log-spaced grid of `count` values from lambda_max down to 1e-4 lambda_max,
// with lambda_max the smallest penalty that zeroes every coefficient.
Eigen::VectorXd default_lambda_grid(const Eigen::MatrixXd& features,
                                    const Eigen::VectorXd& response,
                                    double mixing, int count = 100);

// Elastic net with lambda chosen by minimum mean CV error over `folds`
// deterministic-given-seed folds. noise_variance is the residual sum of
// squares over (rows - nonzero-count - 1), floored at 1e-8.
ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& response, double mixing,
                              const Eigen::VectorXd& lambda_grid, int folds,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Probabilistic-classification density ratio for the (X, Z) factor.
struct ClassifierRatio {
  Eigen::VectorXd coefficients;  // over features (x, z...)
  double intercept = 0.0;
  double prior_correction = 1.0;  // n_source / n_target of the fitting data
};

// Maximum-likelihood logistic fit of `labels` (1 = target) on `features` via
// IRLS with ridge jitter 1e-8; converged when the log-likelihood change drops
// below 1e-9, at most 200 iterations. Throws SeparationError when the
// likelihood diverges. prior_correction is set from the label counts.
ClassifierRatio fit_logistic(const Eigen::MatrixXd& features,
                             const std::vector<int>& labels, std::uint64_t seed);

// prior_correction * p/(1-p) at the fitted target-class probability p,
// clamped to [1e-12, 1e12].
double classifier_ratio_eval(const ClassifierRatio& cr, double x,
                             std::span<const double> z);

// phi(v; mean_t, var_t) / phi(v; mean_s, var_s), computed in log space,
// clamped to [1e-12, 1e12].
double conditional_gaussian_ratio(double v, double mean_t, double var_t,
                                  double mean_s, double var_s);

// ---------------------------------------------------------------------------
// Factorized ratio e(x,z,v) = xz_factor(x,z) * prod_k phi_T(v_k)/phi_S(v_k),
// with V | X,Z modeled per coordinate by the two elastic-net fits (features
// ordered x first, then z).
RatioModel build_factorized_ratio(RatioModel xz_factor,
                                  std::vector<ElasticNetFit> fits_source,
                                  std::vector<ElasticNetFit> fits_target);
RatioModel build_factorized_ratio(RatioModel xz_factor,
                                  std::vector<GaussianLinearModel> v_source,
                                  std::vector<GaussianLinearModel> v_target);

RatioModel make_classifier_ratio_model(ClassifierRatio cr);

// Serializable factorized form: classifier (or neutral) xz factor plus the
// per-coordinate V models.
struct FactorizedRatio {
  std::optional<ClassifierRatio> xz_classifier;  // absent: xz factor = 1
  std::vector<GaussianLinearModel> v_source;
  std::vector<GaussianLinearModel> v_target;
};

RatioModel make_ratio_model(const FactorizedRatio& fr);

// V-model feature vector (x, z...).
Eigen::VectorXd vxz_features(double x, std::span<const double> z);

enum class XzFactorMode { classifier, constant };

struct FactorizedFitResult {
  FactorizedRatio ratio;
  std::vector<ElasticNetFit> fits_source, fits_target;  // full fit diagnostics
};

// Fits the full factorized ratio from unlabeled pools: a probabilistic
// classifier on (x, z) (unless mode = constant) and per-coordinate elastic
// nets for V | X,Z in each population.
FactorizedFitResult fit_factorized_ratio(const UnlabeledPool& source,
                                         const UnlabeledPool& target,
                                         XzFactorMode mode, double mixing,
                                         int folds, std::uint64_t seed);

}  // namespace cspcr
