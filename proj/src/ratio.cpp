#include "cspcr/ratio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cspcr/prng.hpp"

namespace cspcr {

namespace {

constexpr double kCdTol = 1e-7;
constexpr int kMaxSweeps = 100000;
constexpr double kNoiseVarFloor = 1e-8;
constexpr double kIrlsJitter = 1e-8;
constexpr double kIrlsTol = 1e-9;
constexpr int kIrlsMaxIter = 200;
const double kLogRatioMin = std::log(RatioModel::kRatioMin);
const double kLogRatioMax = std::log(RatioModel::kRatioMax);

double soft_threshold(double value, double threshold) {
  if (value > threshold) return value - threshold;
  if (value < -threshold) return value + threshold;
  return 0.0;
}

Standardization standardize(const Eigen::MatrixXd& x, Eigen::MatrixXd& out) {
  const auto n = static_cast<double>(x.rows());
  Standardization s;
  s.mean = x.colwise().mean();
  out = x.rowwise() - s.mean.transpose();
  s.scale = (out.colwise().squaredNorm() / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (s.scale[j] <= 0.0) s.scale[j] = 1.0;  // constant column stays zero
  out.array().rowwise() /= s.scale.transpose().array();
  return s;
}

}  // namespace

double predict(const GaussianLinearModel& model, std::span<const double> features) {
  if (static_cast<Eigen::Index>(features.size()) != model.coefficients.size())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "predict: feature length does not match coefficients");
  double acc = model.intercept;
  for (std::size_t k = 0; k < features.size(); ++k)
    acc += model.coefficients[static_cast<Eigen::Index>(k)] * features[k];
  return acc;
}

double predict(const GaussianLinearModel& model, const Eigen::VectorXd& features) {
  return predict(model, std::span<const double>(features.data(),
                                                static_cast<std::size_t>(features.size())));
}

double elastic_net_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta, double lambda,
                             double mixing) {
  const auto n = static_cast<double>(x.rows());
  const double rss = (y - x * beta).squaredNorm();
  return rss / (2.0 * n) +
         lambda * (mixing * beta.lpNorm<1>() +
                   0.5 * (1.0 - mixing) * beta.squaredNorm());
}

CdResult coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            double lambda, double mixing,
                            Eigen::VectorXd beta_start,
                            std::vector<double>* objective_trace) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::Index p = x.cols();
  CdResult res;
  res.beta = std::move(beta_start);
  if (res.beta.size() != p)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "coordinate_descent: warm start has wrong length");

  Eigen::VectorXd residual = y - x * res.beta;
  const double l1 = lambda * mixing;
  const double ridge = 1.0 + lambda * (1.0 - mixing);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = res.beta[j];
      // Columns have unit variance, so the curvature term is 1.
      const double rho = old + x.col(j).dot(residual) / n;
      const double updated = soft_threshold(rho, l1) / ridge;
      const double delta = updated - old;
      if (delta != 0.0) {
        res.beta[j] = updated;
        residual.noalias() -= delta * x.col(j);
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    res.sweeps = sweep + 1;
    if (objective_trace)
      objective_trace->push_back(
          elastic_net_objective(x, y, res.beta, lambda, mixing));
    if (max_delta < kCdTol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Eigen::VectorXd default_lambda_grid(const Eigen::MatrixXd& features,
                                    const Eigen::VectorXd& response,
                                    double mixing, int count) {
  Eigen::MatrixXd xs;
  standardize(features, xs);
  const Eigen::VectorXd yc = response.array() - response.mean();
  const auto n = static_cast<double>(features.rows());
  double lambda_max =
      (xs.transpose() * yc).cwiseAbs().maxCoeff() / n / std::max(mixing, 1e-3);
  lambda_max = std::max(lambda_max, 1e-12);
  Eigen::VectorXd grid(count);
  if (count == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double log_max = std::log(lambda_max);
  const double log_min = std::log(1e-4 * lambda_max);
  for (int i = 0; i < count; ++i)
    grid[i] = std::exp(log_max + (log_min - log_max) * i / (count - 1));
  return grid;
}

ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& features,
                              const Eigen::VectorXd& response, double mixing,
                              const Eigen::VectorXd& lambda_grid, int folds,
                              std::uint64_t seed) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (response.size() != n)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "fit_elastic_net: response length mismatch");
  if (folds < 2 || n < folds)
    throw ValidationError(ValidationError::Kind::other,
                          "fit_elastic_net requires rows >= folds >= 2");
  if (lambda_grid.size() == 0)
    throw ValidationError(ValidationError::Kind::other, "empty lambda grid");
  if (!(mixing >= 0.0 && mixing <= 1.0))
    throw ValidationError(ValidationError::Kind::other, "mixing must lie in [0,1]");
  if (!features.allFinite() || !response.allFinite())
    throw ValidationError(ValidationError::Kind::non_finite,
                          "fit_elastic_net: non-finite input");

  ElasticNetFit fit;
  fit.mixing = mixing;
  fit.cv_folds = folds;
  fit.lambda_grid = lambda_grid;
  std::sort(fit.lambda_grid.begin(), fit.lambda_grid.end(),
            std::greater<double>());
  const Eigen::Index n_lambda = fit.lambda_grid.size();

  // Deterministic fold assignment: shuffled row order, round-robin folds.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, Stream::cv_folds);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] =
        static_cast<int>(i % folds);

  Eigen::VectorXd cv_sse = Eigen::VectorXd::Zero(n_lambda);
  bool all_converged = true;

  for (int f = 0; f < folds; ++f) {
    std::vector<int> train_idx, valid_idx;
    for (Eigen::Index i = 0; i < n; ++i)
      (fold_of[static_cast<std::size_t>(i)] == f ? valid_idx : train_idx)
          .push_back(static_cast<int>(i));
    if (train_idx.size() < 2)
      throw ValidationError(
          ValidationError::Kind::other,
          "singular design: CV fold leaves fewer than 2 training rows");

    Eigen::MatrixXd x_train(train_idx.size(), p);
    Eigen::VectorXd y_train(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      x_train.row(static_cast<Eigen::Index>(i)) = features.row(train_idx[i]);
      y_train[static_cast<Eigen::Index>(i)] = response[train_idx[i]];
    }
    Eigen::MatrixXd xs;
    const Standardization st = standardize(x_train, xs);
    const double y_mean = y_train.mean();
    const Eigen::VectorXd yc = y_train.array() - y_mean;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (Eigen::Index li = 0; li < n_lambda; ++li) {
      CdResult r = coordinate_descent(xs, yc, fit.lambda_grid[li], mixing,
                                      std::move(beta));
      all_converged = all_converged && r.converged;
      beta = std::move(r.beta);
      // Validation error on the raw scale.
      double sse = 0.0;
      for (int idx : valid_idx) {
        double pred = y_mean;
        for (Eigen::Index j = 0; j < p; ++j)
          pred += beta[j] * (features(idx, j) - st.mean[j]) / st.scale[j];
        const double e = response[idx] - pred;
        sse += e * e;
      }
      cv_sse[li] += sse;
    }
  }

  fit.cv_errors.assign(cv_sse.data(), cv_sse.data() + n_lambda);
  for (auto& e : fit.cv_errors) e /= static_cast<double>(n);

  Eigen::Index best = 0;
  for (Eigen::Index li = 1; li < n_lambda; ++li)
    if (fit.cv_errors[static_cast<std::size_t>(li)] <
        fit.cv_errors[static_cast<std::size_t>(best)])
      best = li;
  fit.lambda_chosen = fit.lambda_grid[best];

  // Final fit on all rows, warm-started along the path down to lambda_chosen.
  Eigen::MatrixXd xs;
  fit.standardization = standardize(features, xs);
  const double y_mean = response.mean();
  const Eigen::VectorXd yc = response.array() - y_mean;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index li = 0; li <= best; ++li) {
    CdResult r = coordinate_descent(xs, yc, fit.lambda_grid[li], mixing,
                                    std::move(beta));
    all_converged = all_converged && r.converged;
    beta = std::move(r.beta);
  }
  fit.converged = all_converged;

  fit.model.coefficients = beta.array() / fit.standardization.scale.array();
  fit.model.intercept =
      y_mean - fit.model.coefficients.dot(fit.standardization.mean);

  int nonzero = 0;
  for (Eigen::Index j = 0; j < p; ++j)
    if (fit.model.coefficients[j] != 0.0) ++nonzero;
  const Eigen::VectorXd fitted =
      (features * fit.model.coefficients).array() + fit.model.intercept;
  const double rss = (response - fitted).squaredNorm();
  const double dof = std::max<double>(1.0, static_cast<double>(n) - nonzero - 1);
  fit.model.noise_variance = std::max(kNoiseVarFloor, rss / dof);
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

double log1pexp(double x) {
  // log(1 + e^x) without overflow.
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

ClassifierRatio fit_logistic(const Eigen::MatrixXd& features,
                             const std::vector<int>& labels,
                             std::uint64_t /*seed*/) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "fit_logistic: label length mismatch");
  Eigen::Index n_target = 0;
  for (int l : labels) {
    if (l != 0 && l != 1)
      throw ValidationError(ValidationError::Kind::other,
                            "fit_logistic: labels must be 0 (source) or 1 (target)");
    n_target += l;
  }
  const Eigen::Index n_source = n - n_target;
  if (n_source == 0 || n_target == 0)
    throw ValidationError(ValidationError::Kind::other,
                          "fit_logistic: both classes must be present");
  if (n < p + 1)
    throw ValidationError(ValidationError::Kind::other,
                          "fit_logistic: need rows >= dimension + 1");

  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = features;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  double ll_prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < kIrlsMaxIter; ++it) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n), w(n);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = prob[i] * (1.0 - prob[i]);
      ll += y[i] * eta[i] - log1pexp(eta[i]);
    }
    if (!std::isfinite(ll) || beta.cwiseAbs().maxCoeff() > 1e8 || ll > -1e-6)
      throw SeparationError(
          "fit_logistic: likelihood diverges (perfectly separated classes); "
          "add regularization or overlap between populations");
    if (std::abs(ll - ll_prev) < kIrlsTol) break;
    ll_prev = ll;

    Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal().array() += kIrlsJitter;
    beta += hessian.ldlt().solve(design.transpose() * (y - prob));
  }

  ClassifierRatio cr;
  cr.intercept = beta[0];
  cr.coefficients = beta.tail(p);
  cr.prior_correction =
      static_cast<double>(n_source) / static_cast<double>(n_target);
  return cr;
}

Eigen::VectorXd vxz_features(double x, std::span<const double> z) {
  Eigen::VectorXd f(1 + static_cast<Eigen::Index>(z.size()));
  f[0] = x;
  for (std::size_t k = 0; k < z.size(); ++k)
    f[1 + static_cast<Eigen::Index>(k)] = z[k];
  return f;
}

double classifier_ratio_eval(const ClassifierRatio& cr, double x,
                             std::span<const double> z) {
  if (static_cast<Eigen::Index>(z.size()) + 1 != cr.coefficients.size())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "classifier_ratio_eval: feature length mismatch");
  double eta = cr.intercept + cr.coefficients[0] * x;
  for (std::size_t k = 0; k < z.size(); ++k)
    eta += cr.coefficients[1 + static_cast<Eigen::Index>(k)] * z[k];
  // p/(1-p) = e^eta; work in log space and clamp.
  const double log_ratio =
      std::clamp(std::log(cr.prior_correction) + eta, kLogRatioMin, kLogRatioMax);
  return std::clamp(std::exp(log_ratio), RatioModel::kRatioMin,
                    RatioModel::kRatioMax);
}

double conditional_gaussian_ratio(double v, double mean_t, double var_t,
                                  double mean_s, double var_s) {
  if (!(var_t > 0.0) || !(var_s > 0.0))
    throw ValidationError(ValidationError::Kind::other,
                          "conditional_gaussian_ratio: variances must be > 0");
  const double dt = v - mean_t;
  const double ds = v - mean_s;
  const double log_ratio = 0.5 * (std::log(var_s / var_t) + ds * ds / var_s -
                                  dt * dt / var_t);
  return std::clamp(std::exp(std::clamp(log_ratio, kLogRatioMin, kLogRatioMax)),
                    RatioModel::kRatioMin, RatioModel::kRatioMax);
}

RatioModel make_classifier_ratio_model(ClassifierRatio cr) {
  return RatioModel(
      RatioModel::Provenance::classifier,
      [cr = std::move(cr)](double x, std::span<const double> z,
                           std::span<const double>) {
        return classifier_ratio_eval(cr, x, z);
      });
}

RatioModel build_factorized_ratio(RatioModel xz_factor,
                                  std::vector<GaussianLinearModel> v_source,
                                  std::vector<GaussianLinearModel> v_target) {
  if (v_source.size() != v_target.size())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "factorized ratio: per-population V model counts differ");
  auto eval = [xz = std::move(xz_factor), vs = std::move(v_source),
               vt = std::move(v_target)](double x, std::span<const double> z,
                                         std::span<const double> v) {
    if (v.size() != vs.size())
      throw ValidationError(ValidationError::Kind::dimension_mismatch,
                            "factorized ratio: v length does not match fitted models");
    // Accumulate in log space; the per-coordinate factors are the same
    // quantities conditional_gaussian_ratio computes, unclamped until the end.
    double log_e = std::log(xz(x, z, v));
    if (!vs.empty()) {
      const Eigen::VectorXd f = vxz_features(x, z);
      for (std::size_t k = 0; k < vs.size(); ++k) {
        const double mt = predict(vt[k], f);
        const double ms = predict(vs[k], f);
        const double st2 = vt[k].noise_variance;
        const double ss2 = vs[k].noise_variance;
        const double dtk = v[k] - mt;
        const double dsk = v[k] - ms;
        log_e += 0.5 * (std::log(ss2 / st2) + dsk * dsk / ss2 - dtk * dtk / st2);
      }
    }
    return std::exp(std::clamp(log_e, kLogRatioMin, kLogRatioMax));
  };
  return RatioModel(RatioModel::Provenance::factorized, std::move(eval));
}

RatioModel build_factorized_ratio(RatioModel xz_factor,
                                  std::vector<ElasticNetFit> fits_source,
                                  std::vector<ElasticNetFit> fits_target) {
  std::vector<GaussianLinearModel> vs, vt;
  vs.reserve(fits_source.size());
  vt.reserve(fits_target.size());
  for (auto& f : fits_source) vs.push_back(std::move(f.model));
  for (auto& f : fits_target) vt.push_back(std::move(f.model));
  return build_factorized_ratio(std::move(xz_factor), std::move(vs), std::move(vt));
}

RatioModel make_ratio_model(const FactorizedRatio& fr) {
  RatioModel xz = fr.xz_classifier ? make_classifier_ratio_model(*fr.xz_classifier)
                                   : constant_ratio(1.0);
  if (fr.v_source.empty() && fr.v_target.empty()) return xz;
  return build_factorized_ratio(std::move(xz), fr.v_source, fr.v_target);
}

FactorizedFitResult fit_factorized_ratio(const UnlabeledPool& source,
                                         const UnlabeledPool& target,
                                         XzFactorMode mode, double mixing,
                                         int folds, std::uint64_t seed) {
  if (source.zdim() != target.zdim() || source.vdim() != target.vdim())
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "source and target pools have different dimensions");
  const Eigen::Index ns = source.n(), nt = target.n();
  const Eigen::Index p = source.zdim(), d = source.vdim();

  FactorizedFitResult out;

  if (mode == XzFactorMode::classifier) {
    Eigen::MatrixXd feats(ns + nt, 1 + p);
    std::vector<int> labels(static_cast<std::size_t>(ns + nt));
    for (Eigen::Index i = 0; i < ns; ++i) {
      feats(i, 0) = source.x()[i];
      feats.row(i).tail(p) = source.z().row(i);
      labels[static_cast<std::size_t>(i)] = 0;
    }
    for (Eigen::Index i = 0; i < nt; ++i) {
      feats(ns + i, 0) = target.x()[i];
      feats.row(ns + i).tail(p) = target.z().row(i);
      labels[static_cast<std::size_t>(ns + i)] = 1;
    }
    out.ratio.xz_classifier =
        fit_logistic(feats, labels, derive_seed(seed, Stream::ratio_fit, 0));
  }

  auto fit_population = [&](const UnlabeledPool& pool, std::uint64_t tag)
      -> std::vector<ElasticNetFit> {
    Eigen::MatrixXd feats(pool.n(), 1 + p);
    feats.col(0) = pool.x();
    feats.rightCols(p) = pool.z();
    std::vector<ElasticNetFit> fits;
    fits.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index k = 0; k < d; ++k) {
      const Eigen::VectorXd resp = pool.v().col(k);
      const Eigen::VectorXd grid = default_lambda_grid(feats, resp, mixing);
      fits.push_back(fit_elastic_net(feats, resp, mixing, grid, folds,
                                     derive_seed(seed, Stream::ratio_fit, tag,
                                                 static_cast<std::uint64_t>(k))));
    }
    return fits;
  };

  out.fits_source = fit_population(source, 1);
  out.fits_target = fit_population(target, 2);
  for (const auto& f : out.fits_source) out.ratio.v_source.push_back(f.model);
  for (const auto& f : out.fits_target) out.ratio.v_target.push_back(f.model);
  return out;
}

}  // namespace cspcr
