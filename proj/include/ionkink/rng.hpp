#pragma once

// Counter-based normal deviates (Philox4x32-10, Salmon et al., SC'11).
//
// A draw is a pure function of (seed, trajectory, step, slot): there is no
// generator state to carry, so trajectories can be split across workers and
// replayed from the manifest bit for bit.

#include <array>
#include <cstdint>

namespace ionkink {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// Standard normal quantile for p in (0, 1), Wichura's AS 241 (relative
/// accuracy about 1e-16).
double inverse_normal_cdf(double p);

class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t trajectory_index);

  /// Four independent standard normal deviates for (step, slot), by
  /// inversion of the four uniforms.
  std::array<double, 4> normals(std::uint64_t step, std::uint32_t slot) const;
  /// `count` normals for `step`, drawn from slots 0, 1, ... four at a time:
  /// out[k] equals normals(step, k / 4)[k % 4].
  void fill_normals(std::uint64_t step, double* out, int count) const;
  /// Four uniforms in (0, 1) for (step, slot).
  std::array<double, 4> uniforms(std::uint64_t step, std::uint32_t slot) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t trajectory_index() const { return trajectory_; }

  /// Step numbers at and above this value are reserved for initialization
  /// draws so they never collide with integration noise.
  static constexpr std::uint64_t kSetupDomain = std::uint64_t{1} << 62;

 private:
  std::uint64_t seed_;
  std::uint64_t trajectory_;
  PhiloxKey key_;
};

}  // namespace ionkink
