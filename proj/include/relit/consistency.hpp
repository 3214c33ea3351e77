#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "relit/degrade.hpp"
#include "relit/envmap.hpp"
#include "relit/image.hpp"

namespace relit {

// f(I, E) -> relit image.
struct RelighterHandle {
  std::function<LinearImage(const LinearImage&, const EnvironmentMap&)> fn;
  bool deterministic = true;

  LinearImage operator()(const LinearImage& img, const EnvironmentMap& env) const {
    if (!fn) throw std::invalid_argument("RelighterHandle: empty evaluator");
    LinearImage out = fn(img, env);
    if (!out.same_size(img.width(), img.height()))
      throw std::runtime_error("RelighterHandle: evaluator changed image dimensions");
    return out;
  }
};

// f_A(image) -> albedo.
struct AlbedoEstimatorHandle {
  std::function<LinearImage(const LinearImage&)> fn;
  bool deterministic = true;

  LinearImage operator()(const LinearImage& img) const {
    if (!fn) throw std::invalid_argument("AlbedoEstimatorHandle: empty evaluator");
    LinearImage out = fn(img);
    if (!out.same_size(img.width(), img.height()))
      throw std::runtime_error("AlbedoEstimatorHandle: evaluator changed image dimensions");
    return out;
  }
};

struct ConsistencyWeights {
  double env = 25.0;
  double amb = 500.0;
};

// Mean of |a - b| over covered pixels and all channels, weighted by coverage.
inline double masked_l1(const LinearImage& a, const LinearImage& b, const Mask& mask) {
  require_same_shape(a, b, "masked_l1");
  require_mask(mask, a, "masked_l1");
  double sum = 0.0, weight = 0.0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      double m = mask.at(x, y);
      if (m <= 0.0) continue;
      for (int c = 0; c < a.channels(); ++c) sum += m * std::abs(static_cast<double>(a.at(x, y, c)) - b.at(x, y, c));
      weight += m * a.channels();
    }
  if (!(weight > 0.0)) throw std::invalid_argument("masked_l1: empty mask");
  return sum / weight;
}

// || f_A[f(I, E1)] - f_A[f(I, E2)] ||_1 as a masked mean.
inline double l_env(const RelighterHandle& f, const AlbedoEstimatorHandle& f_a, const LinearImage& image,
                    const EnvironmentMap& e1, const EnvironmentMap& e2, const Mask& mask) {
  require_mask(mask, image, "l_env");
  LinearImage a1 = f_a(f(image, e1));
  LinearImage a2 = f_a(f(image, e2));
  return masked_l1(a1, a2, mask);
}

// || f_A[T(I)] - f_A(I) ||_1 with T a global brightness/contrast transform.
inline double l_amb(const AlbedoEstimatorHandle& f_a, const LinearImage& image, double gain, double contrast,
                    const Mask& mask) {
  require_mask(mask, image, "l_amb");
  LinearImage transformed = photometric_transform(image, gain, contrast, &mask);
  return masked_l1(f_a(transformed), f_a(image), mask);
}

inline double l_consist(double env_term, double amb_term, const ConsistencyWeights& w = {}) {
  return w.env * env_term + w.amb * amb_term;
}

}  // namespace relit
