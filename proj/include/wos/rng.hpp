#pragma once

#include <array>
#include <cstdint>

#include "wos/point.hpp"

namespace wos {

/// Philox4x32-10 block function: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based random stream keyed by (seed, stream_id).
///
/// The state is a block counter plus a small output buffer, so the stream is
/// a plain value: copy it to fork, move it between workers. Two streams with
/// the same (seed, stream_id) produce identical sequences.
class SeededStream {
 public:
  SeededStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t blocks_used() const { return block_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_open0() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; pairs are cached.
  double normal();

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// Stream for walk `walk_index` of a batch run with `seed`.
inline SeededStream derive_stream(std::uint64_t seed, std::uint64_t walk_index) { return {seed, walk_index}; }

/// Uniform direction on S^{d-1}: a normalized standard Gaussian vector.
Point sample_unit_direction(SeededStream& stream, int dim);

}  // namespace wos
