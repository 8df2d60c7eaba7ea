#pragma once

#include <cstdint>
#include <utility>

#include "cspcr/types.hpp"

namespace cspcr {

// Returns `dataset` unchanged iff every invariant holds (n >= 1, uniform
// dimensions, all entries finite). Throws ValidationError naming the first
// offending row and field otherwise.
const SourceDataset& validate_dataset(const SourceDataset& dataset);

void validate_pool(const UnlabeledPool& pool);

// Disjoint random partition with |first| = round(fraction * n), deterministic
// given seed. Row order within each part follows the original dataset.
std::pair<SourceDataset, SourceDataset> split_dataset(
    const SourceDataset& dataset, double fraction, std::uint64_t seed);

}  // namespace cspcr
