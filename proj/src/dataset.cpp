#include "cspcr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cspcr/prng.hpp"

namespace cspcr {

std::string to_string(Method m) {
  switch (m) {
    case Method::cspcr: return "cspcr";
    case Method::cspcr_pe: return "cspcr-pe";
    case Method::pcr: return "pcr";
    case Method::is: return "is";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "cspcr") return Method::cspcr;
  if (s == "cspcr-pe") return Method::cspcr_pe;
  if (s == "pcr") return Method::pcr;
  if (s == "is") return Method::is;
  throw ValidationError(ValidationError::Kind::other, "unknown method: " + s);
}

SourceDataset::SourceDataset(Eigen::VectorXd y, Eigen::VectorXd x, RowMatrix z,
                             RowMatrix v)
    : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)), v_(std::move(v)) {
  const auto n = y_.size();
  if (x_.size() != n || z_.rows() != n || v_.rows() != n)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "y, x, z, v row counts disagree");
}

SourceDataset SourceDataset::from_rows(const std::vector<LabeledSample>& rows) {
  const int n = static_cast<int>(rows.size());
  const int p = n > 0 ? static_cast<int>(rows[0].z.size()) : 0;
  const int d = n > 0 ? static_cast<int>(rows[0].v.size()) : 0;
  Eigen::VectorXd y(n), x(n);
  RowMatrix z(n, p), v(n, d);
  for (int i = 0; i < n; ++i) {
    const auto& r = rows[i];
    if (static_cast<int>(r.z.size()) != p || static_cast<int>(r.v.size()) != d)
      throw ValidationError(ValidationError::Kind::dimension_mismatch,
                            "row " + std::to_string(i) + " has inconsistent z/v length", i);
    y[i] = r.y;
    x[i] = r.x;
    for (int k = 0; k < p; ++k) z(i, k) = r.z[k];
    for (int k = 0; k < d; ++k) v(i, k) = r.v[k];
  }
  return SourceDataset(std::move(y), std::move(x), std::move(z), std::move(v));
}

LabeledSample SourceDataset::row(int i) const {
  LabeledSample s;
  s.y = y_[i];
  s.x = x_[i];
  s.z.assign(z_.row(i).begin(), z_.row(i).end());
  s.v.assign(v_.row(i).begin(), v_.row(i).end());
  return s;
}

SourceDataset SourceDataset::subset(const std::vector<int>& indices) const {
  const int m = static_cast<int>(indices.size());
  Eigen::VectorXd y(m), x(m);
  RowMatrix z(m, z_.cols()), v(m, v_.cols());
  for (int i = 0; i < m; ++i) {
    const int j = indices[i];
    y[i] = y_[j];
    x[i] = x_[j];
    z.row(i) = z_.row(j);
    v.row(i) = v_.row(j);
  }
  return SourceDataset(std::move(y), std::move(x), std::move(z), std::move(v));
}

UnlabeledPool::UnlabeledPool(Population population, Eigen::VectorXd x,
                             RowMatrix z, RowMatrix v)
    : population_(population), x_(std::move(x)), z_(std::move(z)), v_(std::move(v)) {
  const auto n = x_.size();
  if (z_.rows() != n || v_.rows() != n)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "x, z, v row counts disagree");
}

StatisticFn statistic_yx() {
  return [](double x, double y, std::span<const double>,
            std::span<const double>) { return y * x; };
}

ControlVariateFn control_variate_v1() {
  return [](double, std::span<const double>, std::span<const double> v) {
    if (v.empty())
      throw ValidationError(ValidationError::Kind::dimension_mismatch,
                            "control variate v1 requires at least one v column");
    return v[0];
  };
}

double RatioModel::operator()(double x, std::span<const double> z,
                              std::span<const double> v) const {
  if (!fn_) throw Error("RatioModel evaluated before construction");
  double r = fn_(x, z, v);
  if (std::isnan(r))
    throw ValidationError(ValidationError::Kind::non_finite,
                          "density ratio evaluated to NaN");
  if (r < 0.0)
    throw ValidationError(ValidationError::Kind::other,
                          "density ratio evaluated negative");
  if (r <= kRatioMin || r >= kRatioMax) {
    r = std::clamp(r, kRatioMin, kRatioMax);
    if (clamps_) clamps_->fetch_add(1, std::memory_order_relaxed);
  }
  return r;
}

RatioModel constant_ratio(double value) {
  return RatioModel(RatioModel::Provenance::user,
                    [value](double, std::span<const double>,
                            std::span<const double>) { return value; });
}

void TestConfig::validate(int n) const {
  if (K < 1)
    throw ValidationError(ValidationError::Kind::other, "K must be >= 1");
  if (L < 2)
    throw ValidationError(ValidationError::Kind::other, "L must be >= 2");
  if (K * L - 1 < 1)
    throw ValidationError(ValidationError::Kind::other, "K*L - 1 must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError(ValidationError::Kind::other, "alpha must lie in (0,1)");
  if (method == Method::is && m_resample) {
    if (*m_resample < 1)
      throw ValidationError(ValidationError::Kind::other, "m_resample must be >= 1");
    if (n > 0 && *m_resample > n)
      throw ValidationError(ValidationError::Kind::other,
                            "m_resample exceeds the dataset size");
  }
}

namespace {

void require_finite(double value, int row, const std::string& field) {
  if (!std::isfinite(value))
    throw ValidationError(ValidationError::Kind::non_finite,
                          "non-finite value at row " + std::to_string(row) +
                              ", field " + field,
                          row, field);
}

}  // namespace

const SourceDataset& validate_dataset(const SourceDataset& dataset) {
  if (dataset.n() < 1)
    throw ValidationError(ValidationError::Kind::empty, "dataset is empty");
  for (int i = 0; i < dataset.n(); ++i) {
    require_finite(dataset.y()[i], i, "y");
    require_finite(dataset.x()[i], i, "x");
    for (int k = 0; k < dataset.zdim(); ++k)
      require_finite(dataset.z()(i, k), i, "z[" + std::to_string(k) + "]");
    for (int k = 0; k < dataset.vdim(); ++k)
      require_finite(dataset.v()(i, k), i, "v[" + std::to_string(k) + "]");
  }
  return dataset;
}

void validate_pool(const UnlabeledPool& pool) {
  if (pool.n() < 1)
    throw ValidationError(ValidationError::Kind::empty, "pool is empty");
  for (int i = 0; i < pool.n(); ++i) {
    require_finite(pool.x()[i], i, "x");
    for (int k = 0; k < pool.zdim(); ++k)
      require_finite(pool.z()(i, k), i, "z[" + std::to_string(k) + "]");
    for (int k = 0; k < pool.vdim(); ++k)
      require_finite(pool.v()(i, k), i, "v[" + std::to_string(k) + "]");
  }
}

std::pair<SourceDataset, SourceDataset> split_dataset(
    const SourceDataset& dataset, double fraction, std::uint64_t seed) {
  const int n = dataset.n();
  if (n < 2)
    throw ValidationError(ValidationError::Kind::other,
                          "split_dataset needs n >= 2");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValidationError(ValidationError::Kind::other,
                          "fraction must lie in (0,1)");
  const int na = static_cast<int>(std::llround(fraction * n));
  if (na < 1 || na >= n)
    throw ValidationError(ValidationError::Kind::other,
                          "fraction yields an empty part");

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = make_rng(seed, Stream::split);
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<int> a(idx.begin(), idx.begin() + na);
  std::vector<int> b(idx.begin() + na, idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {dataset.subset(a), dataset.subset(b)};
}

}  // namespace cspcr
