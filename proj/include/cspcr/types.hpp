#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cspcr {

// Row-major storage so a row of Z or V can be handed out as a contiguous span.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Method { cspcr, cspcr_pe, pcr, is };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

enum class Population { source, target };

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data violating a dataset invariant. `row` is the first offending row
// (-1 when not row-specific) and `field` names the offending entry.
class ValidationError : public Error {
 public:
  enum class Kind { non_finite, dimension_mismatch, empty, other };

  ValidationError(Kind kind, const std::string& message, int row = -1,
                  std::string field = {})
      : Error(message), kind(kind), row(row), field(std::move(field)) {}

  Kind kind;
  int row;
  std::string field;
};

// The estimated covariance of the label sums has no positive spectrum, so the
// null law of U is degenerate. No accept/reject decision can be made.
class DegenerateNullError : public Error {
 public:
  using Error::Error;
};

// Logistic likelihood diverges (perfectly separable classes).
class SeparationError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Data containers

// One labeled source observation (y, x, z, v).
struct LabeledSample {
  double y = 0.0;
  double x = 0.0;  // binary treatments are encoded 0/1
  std::vector<double> z;
  std::vector<double> v;
};

// n i.i.d. labeled rows from the source population, stored columnar.
class SourceDataset {
 public:
  SourceDataset() = default;
  SourceDataset(Eigen::VectorXd y, Eigen::VectorXd x, RowMatrix z, RowMatrix v);

  static SourceDataset from_rows(const std::vector<LabeledSample>& rows);

  int n() const { return static_cast<int>(y_.size()); }
  int zdim() const { return static_cast<int>(z_.cols()); }
  int vdim() const { return static_cast<int>(v_.cols()); }

  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::VectorXd& x() const { return x_; }
  const RowMatrix& z() const { return z_; }
  const RowMatrix& v() const { return v_; }

  std::span<const double> z_row(int i) const {
    return {z_.data() + static_cast<std::ptrdiff_t>(i) * z_.cols(),
            static_cast<std::size_t>(z_.cols())};
  }
  std::span<const double> v_row(int i) const {
    return {v_.data() + static_cast<std::ptrdiff_t>(i) * v_.cols(),
            static_cast<std::size_t>(v_.cols())};
  }

  LabeledSample row(int i) const;
  SourceDataset subset(const std::vector<int>& indices) const;

 private:
  Eigen::VectorXd y_, x_;
  RowMatrix z_, v_;
};

// Unlabeled (x, z, v) rows from one population.
class UnlabeledPool {
 public:
  UnlabeledPool() = default;
  UnlabeledPool(Population population, Eigen::VectorXd x, RowMatrix z, RowMatrix v);

  Population population() const { return population_; }
  int n() const { return static_cast<int>(x_.size()); }
  int zdim() const { return static_cast<int>(z_.cols()); }
  int vdim() const { return static_cast<int>(v_.cols()); }

  const Eigen::VectorXd& x() const { return x_; }
  const RowMatrix& z() const { return z_; }
  const RowMatrix& v() const { return v_; }

  std::span<const double> z_row(int i) const {
    return {z_.data() + static_cast<std::ptrdiff_t>(i) * z_.cols(),
            static_cast<std::size_t>(z_.cols())};
  }
  std::span<const double> v_row(int i) const {
    return {v_.data() + static_cast<std::ptrdiff_t>(i) * v_.cols(),
            static_cast<std::size_t>(v_.cols())};
  }

 private:
  Population population_ = Population::source;
  Eigen::VectorXd x_;
  RowMatrix z_, v_;
};

// ---------------------------------------------------------------------------
// User-pluggable callables. All must be reentrant; they are shared across
// concurrent workers without synchronization.

// Draws one X from the target conditional P_T(X | Z = z).
using ConditionalSampler =
    std::function<double(std::span<const double> z, std::mt19937_64& rng)>;

// Scores a (possibly counterfeit) data point. Must be pure and finite on
// finite input. v is available but the default statistic ignores it.
using StatisticFn = std::function<double(
    double x, double y, std::span<const double> z, std::span<const double> v)>;

// Control variate a(x, z, v); pure, finite on finite input.
using ControlVariateFn = std::function<double(
    double x, std::span<const double> z, std::span<const double> v)>;

// Default statistic T(x, y, z, v) = y * x.
StatisticFn statistic_yx();

// Default control variate a(x, z, v) = v[0].
ControlVariateFn control_variate_v1();

// ---------------------------------------------------------------------------
// Density ratio e(x, z, v) = P_T(x, z, v) / P_S(x, z, v).
//
// Evaluations are clamped to [kRatioMin, kRatioMax]; clamp events are counted
// and surface in test diagnostics instead of silently altering results.
class RatioModel {
 public:
  enum class Provenance { analytic, classifier, factorized, user };

  using EvalFn = std::function<double(double x, std::span<const double> z,
                                      std::span<const double> v)>;

  static constexpr double kRatioMin = 1e-12;
  static constexpr double kRatioMax = 1e12;

  RatioModel() = default;
  RatioModel(Provenance provenance, EvalFn fn)
      : provenance_(provenance),
        fn_(std::move(fn)),
        clamps_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}

  double operator()(double x, std::span<const double> z,
                    std::span<const double> v) const;

  Provenance provenance() const { return provenance_; }
  bool valid() const { return static_cast<bool>(fn_); }
  std::uint64_t clamp_count() const {
    return clamps_ ? clamps_->load(std::memory_order_relaxed) : 0;
  }

 private:
  Provenance provenance_ = Provenance::user;
  EvalFn fn_;
  std::shared_ptr<std::atomic<std::uint64_t>> clamps_;
};

// Ratio identically equal to `value` (default 1: no shift).
RatioModel constant_ratio(double value = 1.0);

// ---------------------------------------------------------------------------
// Test configuration

enum class GammaEstimator {
  covariance_ratio,     // plug-in Cov(w·1{l=l}, w·a) / Var(w·a)
  weighted_regression,  // weighted least squares slope of 1{l=l} on a
};

struct TestConfig {
  int K = 50;
  int L = 3;
  double alpha = 0.05;
  Method method = Method::cspcr;
  std::uint64_t seed = 0;
  // IS method only; unset means n/5 (at least 1).
  std::optional<int> m_resample;
  GammaEstimator gamma_estimator = GammaEstimator::covariance_ratio;
  // Exact E_T[a] when known; otherwise estimated from the target pool.
  std::optional<double> a_target_mean;

  // M counterfeits per row.
  int counterfeit_count() const { return K * L - 1; }
  int resample_size(int n) const {
    return m_resample ? *m_resample : std::max(1, n / 5);
  }

  // Throws ValidationError on an unusable configuration. `n` is the dataset
  // size (pass 0 to skip size-dependent checks).
  void validate(int n = 0) const;
};

}  // namespace cspcr
