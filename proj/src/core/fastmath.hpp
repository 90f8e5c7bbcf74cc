#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

namespace lsen {

// Branch-free float exp, |relative error| < 3e-7 on [-87, 0]. Softmax rows
// are max-subtracted before the call, so inputs are non-positive; the lower
// clamp flushes to a harmless subnormal-range value. Written so the compiler
// can vectorize the softmax loop; the double overload defers to std::exp.
inline float fast_exp(float x) {
  x = std::max(x, -87.0f);
  const float z = x * 1.44269504088896341f;  // x / ln 2
  const float n = std::floor(z + 0.5f);
  // r = x - n*ln2 via hi/lo split keeps |r| <= ln2/2 accurately.
  const float r = (x - n * 0.693359375f) + n * 2.12194440e-4f;
  // degree-5 minimax polynomial for e^r on [-ln2/2, ln2/2]
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  p = p * r * r + r + 1.0f;
  const int32_t biased = static_cast<int32_t>(n) + 127;
  const float scale = std::bit_cast<float>(biased << 23);
  return p * scale;
}

inline double fast_exp(double x) { return std::exp(x); }

}  // namespace lsen
