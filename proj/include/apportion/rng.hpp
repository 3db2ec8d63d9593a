#pragma once

#include <cstdint>
#include <random>

namespace apportion {

/// Identifies one reproducible random stream. Substreams for replicate r and
/// source k use stream_id = r * 2^16 + k.
struct RngSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  RngSpec substream(std::uint64_t offset) const { return {master_seed, stream_id + offset}; }
  static constexpr std::uint64_t replicate_stride = std::uint64_t{1} << 16;
};

/// std::mt19937_64 seeded through std::seed_seq; both are fully specified by
/// the standard, so the raw sequence is identical on every platform. Pair it
/// with Boost.Random distributions (also platform independent), not the
/// implementation-defined std:: distributions.
using Engine = std::mt19937_64;

inline Engine make_engine(const RngSpec& spec) {
  std::seed_seq seq{std::uint32_t(spec.master_seed), std::uint32_t(spec.master_seed >> 32),
                    std::uint32_t(spec.stream_id), std::uint32_t(spec.stream_id >> 32),
                    std::uint32_t(0x5EED)};
  return Engine(seq);
}

}  // namespace apportion
