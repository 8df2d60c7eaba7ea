#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cspcr/types.hpp"

namespace cspcr {

// Per-row ranks and labels. labels[j] = ceil(ranks[j] / K): rank r falls in
// the block S_l = {(l-1)K+1, ..., lK}.
struct LabelAssignment {
  std::vector<int> labels;  // in [1, L]
  std::vector<int> ranks;   // in [1, M+1]
};

// M i.i.d. draws from P_T(X | Z = z); deterministic given the rng state.
std::vector<double> counterfeits(std::span<const double> z,
                                 const ConditionalSampler& sampler, int count,
                                 std::mt19937_64& rng);

// Ascending rank of t0 in the multiset {t0} + counterfeit scores, with the
// position inside a tie block assigned uniformly at random. Scores are never
// perturbed.
int rank_with_ties(double t0, std::span<const double> counterfeit_scores,
                   std::mt19937_64& rng);

// Algorithm lines 2-7: per row, score the original point and M = K*L - 1
// counterfeits, rank with random tie-breaking, map the rank to a label block.
// Row j consumes the sub-stream (seed, row j), so rows can be processed in
// any order or concurrently with identical results.
LabelAssignment assign_labels(const SourceDataset& dataset,
                              const ConditionalSampler& sampler,
                              const StatisticFn& statistic, int K, int L,
                              std::uint64_t seed);

}  // namespace cspcr
