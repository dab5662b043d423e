#include "ionkink/rng.hpp"

#include <cmath>

namespace ionkink {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

// Central region |q| <= 0.425 of the AS 241 quantile, q = p - 1/2.
inline double central_quantile(double q) {
  const double r = 0.180625 - q * q;
  return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                 67265.770927008700853) * r + 45921.953931549871457) * r +
               13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                 39307.89580009271061) * r + 21213.794301586595867) * r +
               5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
}

// Uniform on (0, 1): never returns 0 or 1, so the quantile is finite.
inline double to_open_unit(std::uint32_t bits) { return (bits + 0.5) * 0x1p-32; }

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t trajectory_index)
    : seed_(seed),
      trajectory_(trajectory_index),
      key_{static_cast<std::uint32_t>(seed),
           static_cast<std::uint32_t>(seed >> 32) ^ static_cast<std::uint32_t>(trajectory_index >> 32)} {}

std::array<double, 4> NoiseStream::uniforms(std::uint64_t step, std::uint32_t slot) const {
  const PhiloxCounter out =
      philox4x32({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32), slot,
                  static_cast<std::uint32_t>(trajectory_)},
                 key_);
  return {to_open_unit(out[0]), to_open_unit(out[1]), to_open_unit(out[2]), to_open_unit(out[3])};
}

std::array<double, 4> NoiseStream::normals(std::uint64_t step, std::uint32_t slot) const {
  const auto u = uniforms(step, slot);
  return {inverse_normal_cdf(u[0]), inverse_normal_cdf(u[1]), inverse_normal_cdf(u[2]),
          inverse_normal_cdf(u[3])};
}

void NoiseStream::fill_normals(std::uint64_t step, double* out, int count) const {
  for (int k = 0; k < count; k += 4) {
    const auto u = uniforms(step, static_cast<std::uint32_t>(k / 4));
    for (int j = 0; j < 4 && k + j < count; ++j) out[k + j] = u[j];
  }
  for (int k = 0; k < count; ++k) {
    const double q = out[k] - 0.5;
    out[k] = std::abs(q) <= 0.425 ? central_quantile(q) : inverse_normal_cdf(out[k]);
  }
}

double inverse_normal_cdf(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) return central_quantile(q);
  double r = std::sqrt(-std::log(q < 0 ? p : 1.0 - p));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                  0.24178072517745061177) * r + 1.27045825245236838258) * r +
                3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                  0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                  1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
  }
  return q < 0 ? -value : value;
}

}  // namespace ionkink
