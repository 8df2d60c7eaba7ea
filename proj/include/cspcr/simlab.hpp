#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cspcr/engine.hpp"
#include "cspcr/ratio.hpp"
#include "cspcr/types.hpp"

namespace cspcr {

// Data-generating process. Confounders Z = (Z_r, Z_null): the p relevant
// coordinates shift in mean between populations (0 source, 1 target), the q
// null coordinates are N(0.1, 1) in both. X ~ N(u . Z_r, 1) in both
// populations. The scalar surrogate V ~ N(v_pop . Z_r + (1-theta) a_pop X +
// theta a_pop sin(X), 1). Y ~ N((v_pop . Z_r)^2 + beta V + gamma X, 1),
// the same conditional form in both populations.
struct DgpParams {
  int p = 5;
  int q = 50;
  Eigen::VectorXd u;          // X | Z coefficients, shared across populations
  Eigen::VectorXd v_s, v_t;   // V | Z coefficients per population
  double a_s = 0.0;           // X -> V effect per population
  double a_t = 0.0;
  double theta_nl = 0.0;      // nonlinearity share in [0, 1]
  double beta_indirect = 1.0; // V -> Y effect
  double gamma_direct = 0.0;  // X -> Y effect
  int n_labeled = 500;
  int n_pool = 1000;          // ratio-estimation sample size per population

  // p = 5, q = 50, u = v_s = v_t = ones(p)/sqrt(p).
  static DgpParams defaults();
  void validate() const;
};

SourceDataset gen_dataset(const DgpParams& params, Population population,
                          int n, std::uint64_t seed);
UnlabeledPool gen_pool(const DgpParams& params, Population population, int n,
                       std::uint64_t seed);

// The known target conditional X ~ N(u . z_r, 1) (identical to the source).
ConditionalSampler dgp_sampler(const DgpParams& params);

// Exact density ratio of the DGP. The X|Z and Z_null factors cancel; what
// remains is the Z_r mean-shift factor times the conditional V factor, which
// stays Gaussian for any theta_nl.
RatioModel analytic_dgp_ratio(const DgpParams& params);

// The (X, Z) part alone (the Z_r mean-shift factor). This is the known factor
// handed to the estimated ratio in the simulation.
RatioModel analytic_xz_ratio(const DgpParams& params);

enum class RatioMode { analytic, estimated };

struct MethodOutcome {
  bool reject = false;
  bool error = false;
  std::string error_message;
};

// One Monte Carlo trial: generate pools and labeled data, build the ratio,
// run every requested method with the default statistic T = y * x.
std::vector<MethodOutcome> run_trial(const DgpParams& params,
                                     const std::vector<Method>& methods,
                                     RatioMode ratio_mode,
                                     const TestConfig& config,
                                     std::uint64_t trial_seed);

struct ExperimentGrid {
  DgpParams base;
  std::string sweep_name;  // beta, gamma, theta, a_s, a_t, n_pool, n_labeled, L, K
  std::vector<double> sweep_values;
  std::vector<Method> methods;
  int reps = 1000;
  RatioMode ratio_mode = RatioMode::analytic;
  TestConfig config;  // config.seed is the experiment master seed
};

struct ExperimentCell {
  std::string sweep_name;
  double sweep_value = 0.0;
  Method method = Method::cspcr;
  int reps = 0;
  double reject_rate = 0.0;  // over non-error reps
  double mc_se = 0.0;        // sqrt(r (1-r) / reps)
  int errors = 0;
};

struct ExperimentTable {
  std::vector<ExperimentCell> cells;
  std::string to_csv() const;
};

// Applies a named sweep value; throws ValidationError on an unknown name.
void apply_sweep(const std::string& name, double value, DgpParams& params,
                 TestConfig& config);

// Rejection rates over reps trials per (sweep value, method), parallel over
// trials. Trial t of sweep value s draws its randomness from
// (config.seed, s, t), so the table is identical for any thread count.
ExperimentTable run_experiment(const ExperimentGrid& grid, unsigned threads);

}  // namespace cspcr
