#pragma once

#include <cstdint>
#include <random>

namespace wcsim {

using Rng = std::mt19937_64;

/// Independent stream for replication `index` under `seed`. Streams depend
/// only on (seed, index), never on which worker runs them.
inline Rng stream_for(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  return Rng(seq);
}

}  // namespace wcsim
