#include "cspcr/randomize.hpp"

#include <cmath>
#include <string>

#include "cspcr/prng.hpp"

namespace cspcr {

std::vector<double> counterfeits(std::span<const double> z,
                                 const ConditionalSampler& sampler, int count,
                                 std::mt19937_64& rng) {
  if (count < 1)
    throw ValidationError(ValidationError::Kind::other,
                          "counterfeit count must be >= 1");
  std::vector<double> draws(static_cast<std::size_t>(count));
  for (auto& d : draws) d = sampler(z, rng);
  return draws;
}

int rank_with_ties(double t0, std::span<const double> counterfeit_scores,
                   std::mt19937_64& rng) {
  int below = 0, tied = 0;
  for (double s : counterfeit_scores) {
    if (s < t0)
      ++below;
    else if (s == t0)
      ++tied;
  }
  // t0 occupies a uniformly random slot within its tie block.
  int offset = 0;
  if (tied > 0)
    offset = std::uniform_int_distribution<int>(0, tied)(rng);
  return below + 1 + offset;
}

LabelAssignment assign_labels(const SourceDataset& dataset,
                              const ConditionalSampler& sampler,
                              const StatisticFn& statistic, int K, int L,
                              std::uint64_t seed) {
  if (K < 1 || L < 1 || K * L < 2)
    throw ValidationError(ValidationError::Kind::other,
                          "assign_labels requires K >= 1, L >= 1, K*L >= 2");
  const int n = dataset.n();
  const int m = K * L - 1;

  LabelAssignment out;
  out.labels.resize(static_cast<std::size_t>(n));
  out.ranks.resize(static_cast<std::size_t>(n));

  std::vector<double> scores(static_cast<std::size_t>(m));
  for (int j = 0; j < n; ++j) {
    auto rng = make_rng(seed, Stream::row, static_cast<std::uint64_t>(j));
    const auto z = dataset.z_row(j);
    const auto v = dataset.v_row(j);
    const double y = dataset.y()[j];

    const double t0 = statistic(dataset.x()[j], y, z, v);
    if (!std::isfinite(t0))
      throw ValidationError(ValidationError::Kind::non_finite,
                            "statistic returned a non-finite value at row " +
                                std::to_string(j),
                            j, "statistic");
    for (int i = 0; i < m; ++i) {
      const double xt = sampler(z, rng);
      scores[static_cast<std::size_t>(i)] = statistic(xt, y, z, v);
      if (!std::isfinite(scores[static_cast<std::size_t>(i)]))
        throw ValidationError(ValidationError::Kind::non_finite,
                              "statistic returned a non-finite value at row " +
                                  std::to_string(j),
                              j, "statistic");
    }
    const int rank = rank_with_ties(t0, scores, rng);
    out.ranks[static_cast<std::size_t>(j)] = rank;
    out.labels[static_cast<std::size_t>(j)] = (rank - 1) / K + 1;
  }
  return out;
}

}  // namespace cspcr
