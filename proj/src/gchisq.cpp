#include "cspcr/gchisq.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "cspcr/prng.hpp"

namespace cspcr {

CovMatrix::CovMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw ValidationError(ValidationError::Kind::dimension_mismatch,
                          "covariance matrix must be square and nonempty");
  if (!m.allFinite())
    throw ValidationError(ValidationError::Kind::non_finite,
                          "covariance matrix has non-finite entries");
  m_ = 0.5 * (m + m.transpose());
}

SpectralWeights spectral_weights(const CovMatrix& omega) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(omega.matrix(),
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw Error("eigendecomposition failed");

  Eigen::VectorXd ev = solver.eigenvalues();
  const double eps_clip = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());

  SpectralWeights out;
  out.lambdas.resize(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    double l = ev[i];
    if (l <= -eps_clip) {
      out.clipped_mass += -l;
      l = 0.0;
    } else if (l < eps_clip) {
      l = 0.0;
    }
    out.lambdas[i] = l;
  }
  std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<double>());
  return out;
}

namespace {

struct Cumulants {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
};

Cumulants cumulants(const SpectralWeights& w) {
  Cumulants c;
  for (double l : w.lambdas) {
    c.c1 += l;
    c.c2 += 2.0 * l * l;
    c.c3 += 8.0 * l * l * l;
  }
  return c;
}

void require_positive_spectrum(const SpectralWeights& w) {
  if (w.all_zero())
    throw DegenerateNullError(
        "all spectral weights are zero: the null law of U is degenerate");
}

}  // namespace

double gchisq_cdf(const SpectralWeights& weights, double x) {
  require_positive_spectrum(weights);
  if (x < 0.0)
    throw ValidationError(ValidationError::Kind::other,
                          "gchisq_cdf requires x >= 0");
  // Match the first three cumulants to shift + Gamma(shape, scale).
  // By Cauchy-Schwarz the shift is always >= 0 for nonnegative weights,
  // so CDF(0) = 0.
  const Cumulants c = cumulants(weights);
  const double scale = c.c3 / (2.0 * c.c2);
  const double shape = c.c2 / (scale * scale);
  const double shift = c.c1 - shape * scale;
  const double t = (x - shift) / scale;
  if (t <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, t);
}

double gchisq_quantile(const SpectralWeights& weights, double prob) {
  require_positive_spectrum(weights);
  if (!(prob > 0.0 && prob < 1.0))
    throw ValidationError(ValidationError::Kind::other,
                          "quantile probability must lie in (0,1)");
  const Cumulants c = cumulants(weights);
  double lo = 0.0;
  double hi = c.c1 + 20.0 * std::sqrt(c.c2);
  for (int i = 0; i < 64 && gchisq_cdf(weights, hi) < prob; ++i) hi *= 2.0;

  constexpr double kTol = 1e-8;
  double mid = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    mid = 0.5 * (lo + hi);
    const double f = gchisq_cdf(weights, mid);
    if (std::abs(f - prob) <= kTol) break;
    if (f < prob)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  return mid;
}

double mc_quantile(const SpectralWeights& weights, double prob,
                   std::int64_t draws, std::uint64_t seed) {
  if (draws < 10000)
    throw ValidationError(ValidationError::Kind::other,
                          "mc_quantile requires draws >= 10^4");
  if (!(prob > 0.0 && prob < 1.0))
    throw ValidationError(ValidationError::Kind::other,
                          "quantile probability must lie in (0,1)");

  std::vector<double> positive;
  for (double l : weights.lambdas)
    if (l > 0.0) positive.push_back(l);
  if (positive.empty()) return 0.0;  // degenerate point mass at 0

  std::vector<double> samples(static_cast<std::size_t>(draws));
  auto rng = make_rng(seed, Stream::mc);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& s : samples) {
    double acc = 0.0;
    for (double l : positive) {
      const double g = gauss(rng);
      acc += l * g * g;
    }
    s = acc;
  }

  // Type-7 empirical quantile (linear interpolation between order statistics).
  const double h = prob * (static_cast<double>(draws) - 1.0);
  const auto lo_idx = static_cast<std::size_t>(std::floor(h));
  const double frac = h - std::floor(h);
  std::nth_element(samples.begin(), samples.begin() + lo_idx, samples.end());
  const double lo_val = samples[lo_idx];
  if (frac == 0.0 || lo_idx + 1 >= samples.size()) return lo_val;
  const double hi_val =
      *std::min_element(samples.begin() + lo_idx + 1, samples.end());
  return lo_val + frac * (hi_val - lo_val);
}

}  // namespace cspcr
