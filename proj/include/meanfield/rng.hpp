#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace meanfield {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Every draw
/// is a pure function of (key, counter), so samples do not depend on the
/// order in which threads consume them.
class Philox4x32 {
 public:
  using Counter = std::array<uint32_t, 4>;
  using Key = std::array<uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr uint32_t kMul0 = 0xD2511F53u;
  static constexpr uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) noexcept {
    const uint64_t p0 = uint64_t{kMul0} * c[0];
    const uint64_t p1 = uint64_t{kMul1} * c[2];
    return {static_cast<uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<uint32_t>(p1),
            static_cast<uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<uint32_t>(p0)};
  }
};

/// Independent sample streams carved out of one seed.
enum class RngStream : uint32_t { kNoise = 0, kInitialPositions = 1, kInitialVelocities = 2, kTuples = 3 };

/// Opaque RNG state of a simulation: the seed plus the step counter.
struct RngState {
  uint64_t seed = 0;
  uint64_t step = 0;
  bool operator==(const RngState&) const = default;
};

/// Two standard normals keyed by (seed, stream, step, index, block).
/// Box-Muller on two 53-bit uniforms.
inline std::array<double, 2> normal_pair(uint64_t seed, RngStream stream, uint64_t step, uint32_t index,
                                         uint32_t block) noexcept {
  const Philox4x32::Key key{static_cast<uint32_t>(seed),
                            static_cast<uint32_t>(seed >> 32) ^ (static_cast<uint32_t>(stream) * 0x85EBCA6Bu)};
  const Philox4x32::Counter ctr{index, block, static_cast<uint32_t>(step), static_cast<uint32_t>(step >> 32)};
  const auto out = Philox4x32::generate(ctr, key);
  const uint64_t a = (uint64_t{out[0]} << 32 | out[1]) >> 11;
  const uint64_t b = (uint64_t{out[2]} << 32 | out[3]) >> 11;
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(a) + 1.0) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(b) * kScale;          // [0, 1)
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Two uniforms in [0,1) keyed like normal_pair.
inline std::array<double, 2> uniform_pair(uint64_t seed, RngStream stream, uint64_t step, uint32_t index,
                                          uint32_t block) noexcept {
  const Philox4x32::Key key{static_cast<uint32_t>(seed),
                            static_cast<uint32_t>(seed >> 32) ^ (static_cast<uint32_t>(stream) * 0x85EBCA6Bu)};
  const Philox4x32::Counter ctr{index, block, static_cast<uint32_t>(step), static_cast<uint32_t>(step >> 32)};
  const auto out = Philox4x32::generate(ctr, key);
  constexpr double kScale = 1.0 / 9007199254740992.0;
  return {static_cast<double>((uint64_t{out[0]} << 32 | out[1]) >> 11) * kScale,
          static_cast<double>((uint64_t{out[2]} << 32 | out[3]) >> 11) * kScale};
}

}  // namespace meanfield
