#include "cspcr/simlab.hpp"

#include <charconv>
#include <cmath>
#include <random>

#include "cspcr/parallel.hpp"
#include "cspcr/prng.hpp"

namespace cspcr {

DgpParams DgpParams::defaults() {
  DgpParams p;
  const double s = 1.0 / std::sqrt(static_cast<double>(p.p));
  p.u = Eigen::VectorXd::Constant(p.p, s);
  p.v_s = Eigen::VectorXd::Constant(p.p, s);
  p.v_t = Eigen::VectorXd::Constant(p.p, s);
  return p;
}

void DgpParams::validate() const {
  if (p < 1 || q < 0)
    throw ValidationError(ValidationError::Kind::other,
                          "DgpParams: need p > 0 and q >= 0");
  if (u.size() != p || v_s.size() != p || v_t.size() != p)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "DgpParams: u, v_s, v_t must have length p");
  if (!(theta_nl >= 0.0 && theta_nl <= 1.0))
    throw ValidationError(ValidationError::Kind::other,
                          "DgpParams: theta_nl must lie in [0, 1]");
  if (n_labeled < 1 || n_pool < 1)
    throw ValidationError(ValidationError::Kind::other,
                          "DgpParams: sample sizes must be >= 1");
}

namespace {

double v_conditional_mean(const DgpParams& dp, Population pop,
                          const Eigen::Ref<const Eigen::VectorXd>& z_r,
                          double x) {
  const Eigen::VectorXd& coef = pop == Population::source ? dp.v_s : dp.v_t;
  const double a = pop == Population::source ? dp.a_s : dp.a_t;
  return coef.dot(z_r) + (1.0 - dp.theta_nl) * a * x +
         dp.theta_nl * a * std::sin(x);
}

struct SimDraw {
  Eigen::VectorXd y, x;
  RowMatrix z, v;
};

SimDraw gen_samples(const DgpParams& dp, Population pop, int n,
                    std::uint64_t seed, bool labeled) {
  dp.validate();
  if (n < 1)
    throw ValidationError(ValidationError::Kind::other, "gen_samples: n >= 1");

  auto rng = make_rng(seed, pop == Population::source ? Stream::source_pool
                                                      : Stream::target_pool);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double z_r_mean = pop == Population::source ? 0.0 : 1.0;

  SimDraw d;
  d.x.resize(n);
  d.z.resize(n, dp.p + dp.q);
  d.v.resize(n, 1);
  if (labeled) d.y.resize(n);

  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < dp.p; ++k) d.z(i, k) = z_r_mean + gauss(rng);
    for (int k = 0; k < dp.q; ++k) d.z(i, dp.p + k) = 0.1 + gauss(rng);
    const auto z_r = d.z.row(i).head(dp.p).transpose();
    d.x[i] = dp.u.dot(z_r) + gauss(rng);
    d.v(i, 0) = v_conditional_mean(dp, pop, z_r, d.x[i]) + gauss(rng);
    if (labeled) {
      const Eigen::VectorXd& coef = pop == Population::source ? dp.v_s : dp.v_t;
      const double vz = coef.dot(z_r);
      d.y[i] = vz * vz + dp.beta_indirect * d.v(i, 0) +
               dp.gamma_direct * d.x[i] + gauss(rng);
    }
  }
  return d;
}

double log_normal_ratio(double value, double mean_t, double mean_s) {
  // log phi(value; mean_t, 1) - log phi(value; mean_s, 1)
  const double dt = value - mean_t;
  const double ds = value - mean_s;
  return 0.5 * (ds * ds - dt * dt);
}

}  // namespace

SourceDataset gen_dataset(const DgpParams& params, Population population,
                          int n, std::uint64_t seed) {
  SimDraw d = gen_samples(params, population, n, seed, true);
  return SourceDataset(std::move(d.y), std::move(d.x), std::move(d.z),
                       std::move(d.v));
}

UnlabeledPool gen_pool(const DgpParams& params, Population population, int n,
                       std::uint64_t seed) {
  SimDraw d = gen_samples(params, population, n, seed, false);
  return UnlabeledPool(population, std::move(d.x), std::move(d.z),
                       std::move(d.v));
}

ConditionalSampler dgp_sampler(const DgpParams& params) {
  params.validate();
  const Eigen::VectorXd u = params.u;
  return [u](std::span<const double> z, std::mt19937_64& rng) {
    if (static_cast<Eigen::Index>(z.size()) < u.size())
      throw ValidationError(ValidationError::Kind::dimension_mismatch,
                            "sampler: z shorter than the coefficient vector");
    double mean = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k)
      mean += u[k] * z[static_cast<std::size_t>(k)];
    return mean + std::normal_distribution<double>(0.0, 1.0)(rng);
  };
}

RatioModel analytic_xz_ratio(const DgpParams& params) {
  params.validate();
  const int p = params.p;
  return RatioModel(
      RatioModel::Provenance::analytic,
      [p](double, std::span<const double> z, std::span<const double>) {
        // Z_r shifts from N(0, I) to N(1, I); X|Z and Z_null are shared.
        double log_e = 0.0;
        for (int k = 0; k < p; ++k) log_e += z[static_cast<std::size_t>(k)] - 0.5;
        return std::exp(log_e);
      });
}

RatioModel analytic_dgp_ratio(const DgpParams& params) {
  params.validate();
  const DgpParams dp = params;
  return RatioModel(
      RatioModel::Provenance::analytic,
      [dp](double x, std::span<const double> z, std::span<const double> v) {
        double log_e = 0.0;
        for (int k = 0; k < dp.p; ++k)
          log_e += z[static_cast<std::size_t>(k)] - 0.5;
        if (!v.empty()) {
          const Eigen::Map<const Eigen::VectorXd> z_r(z.data(), dp.p);
          const double mt = v_conditional_mean(dp, Population::target, z_r, x);
          const double ms = v_conditional_mean(dp, Population::source, z_r, x);
          log_e += log_normal_ratio(v[0], mt, ms);
        }
        return std::exp(log_e);
      });
}

std::vector<MethodOutcome> run_trial(const DgpParams& params,
                                     const std::vector<Method>& methods,
                                     RatioMode ratio_mode,
                                     const TestConfig& config,
                                     std::uint64_t trial_seed) {
  params.validate();

  const SourceDataset data = gen_dataset(
      params, Population::source, params.n_labeled,
      derive_seed(trial_seed, Stream::labeled));
  const ConditionalSampler sampler = dgp_sampler(params);
  const StatisticFn statistic = statistic_yx();

  bool needs_ratio = false;
  bool needs_pe = false;
  for (Method m : methods) {
    needs_ratio = needs_ratio || m != Method::pcr;
    needs_pe = needs_pe || m == Method::cspcr_pe;
  }

  UnlabeledPool target_pool;
  RatioModel ratio;
  if (needs_ratio) {
    if (ratio_mode == RatioMode::analytic) {
      ratio = analytic_dgp_ratio(params);
      if (needs_pe && !config.a_target_mean)
        target_pool = gen_pool(params, Population::target, params.n_pool,
                               derive_seed(trial_seed, Stream::target_pool));
    } else {
      const UnlabeledPool source_pool =
          gen_pool(params, Population::source, params.n_pool,
                   derive_seed(trial_seed, Stream::source_pool));
      target_pool = gen_pool(params, Population::target, params.n_pool,
                             derive_seed(trial_seed, Stream::target_pool));
      // The (X, Z) law is known in the simulation; only V | X,Z is estimated.
      FactorizedFitResult fit = fit_factorized_ratio(
          source_pool, target_pool, XzFactorMode::constant, 0.5, 5,
          derive_seed(trial_seed, Stream::ratio_fit));
      ratio = build_factorized_ratio(analytic_xz_ratio(params),
                                     fit.ratio.v_source, fit.ratio.v_target);
    }
  }

  TestConfig run_config = config;
  run_config.seed = derive_seed(trial_seed, Stream::test);

  std::vector<MethodOutcome> out(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    run_config.method = methods[mi];
    try {
      TestReport report;
      switch (methods[mi]) {
        case Method::cspcr:
          report = run_cspcr(data, ratio, sampler, statistic, run_config);
          break;
        case Method::cspcr_pe:
          report = run_cspcr_pe(data, ratio, sampler, statistic,
                                control_variate_v1(),
                                target_pool.n() > 0 ? &target_pool : nullptr,
                                run_config);
          break;
        case Method::pcr:
          report = run_pcr(data, sampler, statistic, run_config);
          break;
        case Method::is:
          report = run_is(data, ratio, sampler, statistic, run_config);
          break;
      }
      out[mi].reject = report.reject;
    } catch (const DegenerateNullError& e) {
      out[mi].error = true;
      out[mi].error_message = e.what();
    }
  }
  return out;
}

void apply_sweep(const std::string& name, double value, DgpParams& params,
                 TestConfig& config) {
  if (name == "beta") params.beta_indirect = value;
  else if (name == "gamma") params.gamma_direct = value;
  else if (name == "theta") params.theta_nl = value;
  else if (name == "a_s") params.a_s = value;
  else if (name == "a_t") params.a_t = value;
  else if (name == "n_pool") params.n_pool = static_cast<int>(value);
  else if (name == "n_labeled") params.n_labeled = static_cast<int>(value);
  else if (name == "L") config.L = static_cast<int>(value);
  else if (name == "K") config.K = static_cast<int>(value);
  else
    throw ValidationError(ValidationError::Kind::other,
                          "unknown sweep parameter: " + name);
}

ExperimentTable run_experiment(const ExperimentGrid& grid, unsigned threads) {
  if (grid.reps < 1)
    throw ValidationError(ValidationError::Kind::other, "reps must be >= 1");
  if (grid.sweep_values.empty())
    throw ValidationError(ValidationError::Kind::other, "empty sweep");
  if (grid.methods.empty())
    throw ValidationError(ValidationError::Kind::other, "no methods requested");
  for (double v : grid.sweep_values)
    if (!std::isfinite(v))
      throw ValidationError(ValidationError::Kind::non_finite,
                            "sweep values must be finite");

  const std::size_t n_values = grid.sweep_values.size();
  const auto reps = static_cast<std::size_t>(grid.reps);
  std::vector<std::vector<MethodOutcome>> results(n_values * reps);

  parallel_for(n_values * reps, threads, [&](std::size_t t) {
    const std::size_t vi = t / reps;
    const std::size_t rep = t % reps;
    DgpParams params = grid.base;
    TestConfig config = grid.config;
    apply_sweep(grid.sweep_name, grid.sweep_values[vi], params, config);
    const std::uint64_t trial_seed =
        derive_seed(grid.config.seed, Stream::trial, vi, rep);
    results[t] = run_trial(params, grid.methods, grid.ratio_mode, config,
                           trial_seed);
  });

  ExperimentTable table;
  for (std::size_t vi = 0; vi < n_values; ++vi) {
    for (std::size_t mi = 0; mi < grid.methods.size(); ++mi) {
      ExperimentCell cell;
      cell.sweep_name = grid.sweep_name;
      cell.sweep_value = grid.sweep_values[vi];
      cell.method = grid.methods[mi];
      cell.reps = grid.reps;
      int rejects = 0, errors = 0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const MethodOutcome& o = results[vi * reps + rep][mi];
        if (o.error)
          ++errors;
        else if (o.reject)
          ++rejects;
      }
      cell.errors = errors;
      const int effective = grid.reps - errors;
      cell.reject_rate =
          effective > 0 ? static_cast<double>(rejects) / effective : 0.0;
      cell.mc_se = effective > 0
                       ? std::sqrt(cell.reject_rate * (1.0 - cell.reject_rate) /
                                   effective)
                       : 0.0;
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string ExperimentTable::to_csv() const {
  std::string out =
      "sweep_param,sweep_value,method,reps,reject_rate,mc_se,errors_count\n";
  for (const auto& c : cells) {
    out += c.sweep_name;
    out += ',';
    out += format_double(c.sweep_value);
    out += ',';
    out += to_string(c.method);
    out += ',';
    out += std::to_string(c.reps);
    out += ',';
    out += format_double(c.reject_rate);
    out += ',';
    out += format_double(c.mc_se);
    out += ',';
    out += std::to_string(c.errors);
    out += '\n';
  }
  return out;
}

}  // namespace cspcr
