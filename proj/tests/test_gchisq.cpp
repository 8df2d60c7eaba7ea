#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <random>

#include "cspcr/gchisq.hpp"

using namespace cspcr;

namespace {

SpectralWeights weights_of(std::initializer_list<double> ls) {
  SpectralWeights w;
  w.lambdas = Eigen::VectorXd(static_cast<Eigen::Index>(ls.size()));
  Eigen::Index i = 0;
  for (double l : ls) w.lambdas[i++] = l;
  return w;
}

// Monte Carlo CDF oracle, independent of the moment-matched path.
double mc_cdf(const SpectralWeights& w, double x, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  int below = 0;
  for (int i = 0; i < draws; ++i) {
    double acc = 0.0;
    for (double l : w.lambdas) {
      const double gi = g(rng);
      acc += l * gi * gi;
    }
    if (acc <= x) ++below;
  }
  return static_cast<double>(below) / draws;
}

// Random PSD matrix A^T A / L with entries N(0,1).
Eigen::MatrixXd random_psd(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = g(rng);
  return a.transpose() * a / dim;
}

}  // namespace

TEST_SUITE_BEGIN("gchisq");

TEST_CASE("spectral weights of the identity") {
  SpectralWeights w = spectral_weights(CovMatrix(Eigen::MatrixXd::Identity(3, 3)));
  REQUIRE(w.lambdas.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(w.lambdas[i] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.clipped_mass == 0.0);
}

TEST_CASE("spectral weights of the centering projection") {
  // I - (1/3) J has eigenvalues (1, 1, 0).
  Eigen::MatrixXd omega = Eigen::MatrixXd::Identity(3, 3) -
                          Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
  SpectralWeights w = spectral_weights(CovMatrix(omega));
  CHECK(w.lambdas[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.lambdas[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w.lambdas[2] == 0.0);
  CHECK(w.clipped_mass == 0.0);
}

TEST_CASE("negative eigenvalues are clipped with their mass recorded") {
  Eigen::MatrixXd omega(2, 2);
  omega << -0.25, -0.5, -0.5, 1.75;
  // Closed form for the 2x2: l = (tr +- sqrt(tr^2 - 4 det)) / 2.
  const double tr = 1.5, det = -0.25 * 1.75 - 0.25;
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  const double l_pos = (tr + disc) / 2.0;
  const double l_neg = (tr - disc) / 2.0;
  REQUIRE(l_neg < 0.0);

  SpectralWeights w = spectral_weights(CovMatrix(omega));
  CHECK(w.lambdas[0] == doctest::Approx(l_pos).epsilon(1e-12));
  CHECK(w.lambdas[1] == 0.0);
  CHECK(w.clipped_mass == doctest::Approx(-l_neg).epsilon(1e-12));
}

TEST_CASE("symmetrization happens on construction") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.4, 0.0, 1.0;
  CovMatrix cov(m);
  CHECK(cov.matrix()(0, 1) == doctest::Approx(0.2));
  CHECK(cov.matrix() == cov.matrix().transpose().eval());
}

TEST_CASE("cdf of a single weight matches the 1-df chi-squared") {
  SpectralWeights w = weights_of({1.0});
  // Frozen from a 10^6-draw Monte Carlo of chisq_1 at 3.841 (= 0.9500 +- 0.001).
  CHECK(gchisq_cdf(w, 3.841) == doctest::Approx(0.95).epsilon(0.0021));
  CHECK(mc_cdf(w, 3.841, 1000000, 7) == doctest::Approx(gchisq_cdf(w, 3.841)).epsilon(0.002));
}

TEST_CASE("cdf at the origin is zero") {
  CHECK(gchisq_cdf(weights_of({1.0, 1.0}), 0.0) == 0.0);
}

TEST_CASE("cdf scaling symmetry") {
  SpectralWeights one = weights_of({1.0, 1.0});
  SpectralWeights two = weights_of({2.0, 2.0});
  for (double x : {0.5, 1.0, 3.0, 8.0})
    CHECK(gchisq_cdf(two, x) == doctest::Approx(gchisq_cdf(one, x / 2.0)).epsilon(1e-12));
}

TEST_CASE("cdf requires a positive spectrum") {
  CHECK_THROWS_AS(gchisq_cdf(weights_of({0.0, 0.0}), 1.0), DegenerateNullError);
  CHECK_THROWS_AS(gchisq_quantile(weights_of({0.0}), 0.5), DegenerateNullError);
}

TEST_CASE("quantiles match Monte Carlo oracles") {
  // (1,1,0) at 0.95 is the chisq_2 quantile 5.991.
  CHECK(gchisq_quantile(weights_of({1.0, 1.0, 0.0}), 0.95) ==
        doctest::Approx(5.991).epsilon(0.02 / 5.991));
  // chisq_1 median 0.4549.
  CHECK(gchisq_quantile(weights_of({1.0}), 0.5) == doctest::Approx(0.455).epsilon(0.02));
  // Cross-check against the in-repo Monte Carlo path.
  SpectralWeights w = weights_of({2.0, 0.7, 0.1});
  const double q = gchisq_quantile(w, 0.95);
  const double q_mc = mc_quantile(w, 0.95, 1000000, 11);
  CHECK(std::abs(q - q_mc) <= std::max(0.05, 0.01 * q_mc));
}

TEST_CASE("quantile is monotone in the probability") {
  SpectralWeights w = weights_of({1.4, 0.6, 0.2});
  double prev = 0.0;
  for (double p : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    const double q = gchisq_quantile(w, p);
    CHECK(q >= prev);
    prev = q;
  }
}

TEST_CASE("cdf/quantile round trip") {
  SpectralWeights w = weights_of({1.7, 0.9, 0.4, 0.05});
  for (double p : {0.01, 0.05, 0.5, 0.95, 0.99})
    CHECK(gchisq_cdf(w, gchisq_quantile(w, p)) == doctest::Approx(p).epsilon(1e-6));
}

TEST_CASE("mc_quantile matches the chi-squared quantile for equal weights") {
  SpectralWeights w;
  w.lambdas = Eigen::VectorXd::Ones(10);
  const double q = mc_quantile(w, 0.95, 1000000, 5);
  boost::math::chi_squared chi10(10);
  CHECK(q == doctest::Approx(boost::math::quantile(chi10, 0.95)).epsilon(0.005));
}

TEST_CASE("mc_quantile degenerate and determinism cases") {
  CHECK(mc_quantile(weights_of({0.0}), 0.9, 10000, 1) == 0.0);
  SpectralWeights w = weights_of({1.0, 0.5});
  CHECK(mc_quantile(w, 0.9, 50000, 42) == mc_quantile(w, 0.9, 50000, 42));
  CHECK(mc_quantile(w, 0.9, 50000, 42) != mc_quantile(w, 0.9, 50000, 43));
  CHECK_THROWS_AS(mc_quantile(w, 0.9, 100, 1), ValidationError);
}

TEST_CASE("moment-matched quantiles agree with Monte Carlo on random PSD matrices") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim_dist(1, 10);
  for (int rep = 0; rep < 12; ++rep) {
    const int dim = dim_dist(rng);
    SpectralWeights w = spectral_weights(CovMatrix(random_psd(dim, rng)));
    if (w.all_zero()) continue;
    const double q = gchisq_quantile(w, 0.95);
    const double q_mc = mc_quantile(w, 0.95, 200000, 1000 + rep);
    CHECK(std::abs(q - q_mc) <= std::max(0.05, 0.012 * q_mc));
  }
}

TEST_CASE("projection covariance reproduces chi-squared thresholds") {
  for (int L : {2, 3, 5, 10}) {
    Eigen::MatrixXd omega =
        Eigen::MatrixXd::Identity(L, L) -
        Eigen::MatrixXd::Constant(L, L, 1.0 / static_cast<double>(L));
    SpectralWeights w = spectral_weights(CovMatrix(omega));
    boost::math::chi_squared ref(L - 1);
    for (double p : {0.5, 0.9, 0.95, 0.99})
      CHECK(gchisq_quantile(w, p) ==
            doctest::Approx(boost::math::quantile(ref, p)).epsilon(1e-6));
  }
}

TEST_SUITE_END();
