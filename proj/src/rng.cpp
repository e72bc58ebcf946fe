#include "edreg/rng.hpp"

#include <cmath>

namespace edreg {
namespace rng {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t stream_key(std::uint64_t seed, std::string_view purpose,
                         std::uint64_t step, std::uint64_t index) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ hash_label(purpose));
  k = mix64(k ^ step);
  k = mix64(k ^ index);
  return k;
}

std::uint64_t word(std::uint64_t key, std::uint64_t counter) {
  return mix64(key ^ (counter * 0xD1B54A32D192ED03ULL));
}

double uniform(std::uint64_t key, std::uint64_t counter) {
  // 53 high bits, shifted into (0, 1] so log() is always finite.
  return (static_cast<double>(word(key, counter) >> 11) + 1.0) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t k) {
  return stream_key(seed, label, k, 0);
}

}  // namespace rng

DirectionSet sample_sphere(std::uint64_t seed, std::string_view purpose,
                           std::uint64_t step, Eigen::Index count, Eigen::Index dim) {
  if (count < 1 || dim < 1)
    throw InvalidArgument("sample_sphere: need count >= 1 and dim >= 1");

  DirectionSet set;
  set.directions.resize(count, dim);
  set.seed = seed;
  set.purpose = std::string(purpose);
  set.step = step;

  const double two_pi = 2.0 * M_PI;
  for (Eigen::Index p = 0; p < count; ++p) {
    const std::uint64_t key = rng::stream_key(seed, purpose, step,
                                              static_cast<std::uint64_t>(p));
    std::uint64_t counter = 0;
    for (;;) {
      for (Eigen::Index c = 0; c < dim; c += 2) {
        const double u1 = rng::uniform(key, counter++);
        const double u2 = rng::uniform(key, counter++);
        const double r = std::sqrt(-2.0 * std::log(u1));
        set.directions(p, c) = r * std::cos(two_pi * u2);
        if (c + 1 < dim) set.directions(p, c + 1) = r * std::sin(two_pi * u2);
      }
      const double norm = set.directions.row(p).norm();
      if (norm > 0.0 && std::isfinite(norm)) {
        set.directions.row(p) /= norm;
        break;
      }
      // Zero draw: continue the counter so the redraw stays deterministic.
    }
  }
  return set;
}

}  // namespace edreg
