#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "pulsesim/errors.hpp"

namespace pulsesim {

/// Counter-based random stream (Philox4x64-10).
///
/// Each stream is fully determined by (master_seed, stream_id); trial
/// streams use stream_id = trial_index, so records do not depend on
/// execution order. One stream yields 4 * 2^64 words; when the block
/// counter would wrap the stream throws instead of reseeding.
class PhiloxStream {
public:
  PhiloxStream(std::uint64_t master_seed, std::uint64_t stream_id,
               std::uint64_t start_block = 0)
      : key_{master_seed, stream_id}, block_(start_block) {}

  std::uint64_t master_seed() const noexcept { return key_[0]; }
  std::uint64_t stream_id() const noexcept { return key_[1]; }

  std::uint64_t next_u64() {
    if (buf_pos_ == 4) {
      refill();
    }
    return buf_[buf_pos_++];
  }

  /// Uniform double in [0, 1), 53 significant bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; used where an exact zero is excluded.
  double next_double_open_low() { return 1.0 - next_double(); }

  /// Generates the four 64-bit words of a given counter block without
  /// touching the stream position. Exposed for the known-answer tests.
  std::array<std::uint64_t, 4> block(std::uint64_t counter) const {
    std::array<std::uint64_t, 4> ctr{counter, 0, 0, 0};
    std::array<std::uint64_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = philox_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

private:
  static constexpr std::uint64_t kMult0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMult1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

  static std::array<std::uint64_t, 4>
  philox_round(const std::array<std::uint64_t, 4>& ctr,
               const std::array<std::uint64_t, 2>& key) {
    const unsigned __int128 p0 =
        static_cast<unsigned __int128>(kMult0) * ctr[0];
    const unsigned __int128 p1 =
        static_cast<unsigned __int128>(kMult1) * ctr[2];
    const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
    const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  void refill() {
    if (exhausted_) {
      throw ReproducibilityError(
          "random stream exhausted: counter space consumed for stream (" +
          std::to_string(key_[0]) + ", " + std::to_string(key_[1]) + ")");
    }
    buf_ = block(block_);
    buf_pos_ = 0;
    if (block_ == UINT64_MAX) {
      exhausted_ = true;
    } else {
      ++block_;
    }
  }

  std::array<std::uint64_t, 2> key_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 4> buf_{};
  int buf_pos_ = 4;
  bool exhausted_ = false;
};

} // namespace pulsesim
