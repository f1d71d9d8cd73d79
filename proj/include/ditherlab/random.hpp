// Counter-based random streams.
//
// A stream is identified by (master_seed, stream_id, substream_id). The key is
// a SplitMix64 hash of the triple and the n-th draw is a SplitMix64 finalizer
// applied to key + n * gamma, so draws depend only on the identity and the
// position, never on which thread asks or in what order.
#pragma once

#include <cstdint>

#include "ditherlab/numerics.hpp"

namespace ditherlab {

namespace substream {
inline constexpr std::uint64_t kSignalNoise = 0;
inline constexpr std::uint64_t kDither = 1;
inline constexpr std::uint64_t kLocation = 2;
}  // namespace substream

class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t substream_id = 0)
      : master_seed_(master_seed), stream_id_(stream_id), substream_id_(substream_id) {
    std::uint64_t k = mix(master_seed ^ 0x6a09e667f3bcc909ULL);
    k = mix(k ^ (stream_id + 0xbb67ae8584caa73bULL));
    k = mix(k ^ (substream_id + 0x3c6ef372fe94f82bULL));
    key_ = k;
  }

  /// Same seed and stream, different substream; the counter starts at zero.
  RandomStream substream(std::uint64_t id) const { return {master_seed_, stream_id_, id}; }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t substream_id() const { return substream_id_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on the open interval (0, 1); 53 random bits, offset by half an ulp.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by inverse-CDF transform of one uniform draw.
  double normal() { return std_normal_quantile(uniform()); }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t substream_id_;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace ditherlab
