#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace hyloc {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3", SC'11). Pure function of (counter, key).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// 64-bit FNV-1a hash, used to turn stream names into stream ids.
std::uint64_t fnv1a64(std::string_view s);

/// Counter-based random stream.
///
/// Draw k of stream (seed, stream_id) is philox4x32_10 applied to
/// counter = {k_lo, k_hi, stream_lo, stream_hi} with key = {seed_lo, seed_hi};
/// the first two output words form a 64-bit integer (word1 high). Uniform
/// doubles take the top 53 bits. Normals use the cosine branch of Box-Muller
/// on two consecutive uniforms, exponentials use inversion. Sequences depend
/// only on (seed, stream_id, counter), so adding a stream never perturbs
/// another.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  /// Stream keyed by a "module/purpose" name.
  static RngStream named(std::uint64_t seed, std::string_view name) { return {seed, fnv1a64(name)}; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_uniform();
  /// Throws ArgumentError when sigma < 0. sigma == 0 returns mu exactly.
  double next_gauss(double mu, double sigma);
  /// Exponential with the given mean (>= 0).
  double next_exponential(double mean);
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

/// Free-function form of RngStream::next_gauss.
inline double rng_next_gauss(RngStream& stream, double mu, double sigma) { return stream.next_gauss(mu, sigma); }

}  // namespace hyloc
