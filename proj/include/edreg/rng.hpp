#pragma once

#include "edreg/types.hpp"

#include <cstdint>
#include <string_view>

namespace edreg {

// Counter-based random streams. A stream is keyed by
// (seed, purpose label, step, index); each key yields an independent sequence
// of draws addressed by a counter. Values never depend on evaluation order,
// so parallel generation is reproducible across any schedule.

namespace rng {

/// SplitMix64 finalizer; bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t z);

/// FNV-1a hash of a label.
std::uint64_t hash_label(std::string_view label);

/// Key for the stream (seed, purpose, step, index).
std::uint64_t stream_key(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t step, std::uint64_t index);

/// k-th raw 64-bit word of the stream with the given key.
std::uint64_t word(std::uint64_t key, std::uint64_t counter);

/// k-th uniform draw in (0, 1].
double uniform(std::uint64_t key, std::uint64_t counter);

/// Derives a child seed, used to refresh direction streams between
/// optimizer iterations.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                          std::uint64_t k);

}  // namespace rng

/// P i.i.d.-uniform unit vectors on S^{d-1}: standard-normal d-vectors
/// (Box-Muller over counter-based uniforms) normalized to unit length.
/// Deterministic given (seed, purpose, step, index) regardless of execution
/// order; the measure-zero event of a zero vector is rejected by redraw.
DirectionSet sample_sphere(std::uint64_t seed, std::string_view purpose,
                           std::uint64_t step, Eigen::Index count,
                           Eigen::Index dim);

}  // namespace edreg
