#include "gma/random.hpp"

#include <cmath>
#include <numbers>

namespace gma {

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t draw;
  do {
    draw = (*this)();
  } while (draw >= limit);
  return draw % bound;
}

double SplitMix64::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  SplitMix64 mix(base);
  std::uint64_t h = mix();
  for (std::uint64_t part : {a, b, c}) {
    SplitMix64 step(h ^ (part * 0xd1b54a32d192ed03ULL));
    h = step();
  }
  return h;
}

}  // namespace gma
