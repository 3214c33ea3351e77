#pragma once

#include <cmath>
#include <stdexcept>

#include "relit/envmap.hpp"
#include "relit/image.hpp"

namespace relit {

// Camera-space unit normals (x right, y up, z towards the viewer), stored
// remapped from [-1,1] to [0,1] so the raster stays non-negative.
class NormalMap {
 public:
  NormalMap() = default;
  NormalMap(int width, int height) : encoded_(width, height, 3, 0.0f) {}
  explicit NormalMap(LinearImage encoded) : encoded_(std::move(encoded)) {
    if (encoded_.channels() != 3) throw std::invalid_argument("NormalMap: needs 3 channels");
  }

  int width() const { return encoded_.width(); }
  int height() const { return encoded_.height(); }
  const LinearImage& encoded() const { return encoded_; }
  LinearImage& encoded() { return encoded_; }

  Vec3 normal(int x, int y) const {
    return {2.0 * encoded_.at(x, y, 0) - 1.0, 2.0 * encoded_.at(x, y, 1) - 1.0,
            2.0 * encoded_.at(x, y, 2) - 1.0};
  }
  void set(int x, int y, const Vec3& n) {
    for (int c = 0; c < 3; ++c) encoded_.at(x, y, c) = static_cast<float>(0.5 * (n[c] + 1.0));
  }

  // Unit length within `tol` wherever the mask covers.
  bool valid_under(const Mask& mask, double tol = 1e-3) const {
    if (!mask.matches(encoded_)) return false;
    for (int y = 0; y < height(); ++y)
      for (int x = 0; x < width(); ++x)
        if (mask.covered(x, y) && std::abs(normal(x, y).norm() - 1.0) > tol) return false;
    return true;
  }

 private:
  LinearImage encoded_;
};

}  // namespace relit
