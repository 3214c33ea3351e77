#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relit/image.hpp"

namespace relit {

inline constexpr double kDefaultGamma = 2.2;

// Linear -> display: clamp to [0,1], then x^(1/gamma).
inline LinearImage gamma_encode(const LinearImage& img, double gamma = kDefaultGamma) {
  LinearImage out = img;
  const double inv = 1.0 / gamma;
  for (float& v : out.data()) {
    double x = std::clamp(static_cast<double>(v), 0.0, 1.0);
    v = static_cast<float>(std::pow(x, inv));
  }
  return out;
}

// Display -> linear. Values outside [0,1] by more than `tolerance` are rejected.
inline LinearImage gamma_decode(const LinearImage& img, double gamma = kDefaultGamma,
                                double tolerance = 1e-6) {
  LinearImage out = img;
  for (float& v : out.data()) {
    if (!std::isfinite(v) || v < -tolerance || v > 1.0 + tolerance)
      throw std::invalid_argument("gamma_decode: display value outside [0,1]");
    double x = std::clamp(static_cast<double>(v), 0.0, 1.0);
    v = static_cast<float>(std::pow(x, gamma));
  }
  return out;
}

}  // namespace relit
