#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "blindmimo/types.hpp"

namespace blindmimo {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit hash of a label (FNV-1a), used to separate experiment streams.
std::uint64_t label_hash(std::string_view label);

/// Per-trial seed: hash(master, experiment, snr_index, trial_index).
/// Independent of scheduling, so parallel sweeps are reproducible.
std::uint64_t derive_seed(std::uint64_t master, std::string_view experiment,
                          std::uint64_t point_index, std::uint64_t trial_index);

Rng make_stream(std::uint64_t master, std::string_view experiment,
                std::uint64_t point_index, std::uint64_t trial_index);

/// Fills `out` with i.i.d. CN(0, variance) samples, column-major order.
void fill_complex_normal(Rng& rng, CMatrix& out, double variance = 1.0);

cplx complex_normal(Rng& rng, double variance = 1.0);

}  // namespace blindmimo
