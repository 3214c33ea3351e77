#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace relit {

// Row-major float raster. Used for linear radiance, display-encoded images,
// encoded normals and signed residuals alike; radiance invariants are checked
// explicitly with is_valid_radiance() where an operation requires them.
class LinearImage {
 public:
  LinearImage() = default;

  LinearImage(int width, int height, int channels, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    check_shape(width, height, channels);
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  LinearImage(int width, int height, int channels, std::vector<float> data)
      : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
    check_shape(width, height, channels);
    if (data_.size() != static_cast<std::size_t>(width) * height * channels)
      throw std::invalid_argument("LinearImage: data length does not match width*height*channels");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  float& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::vector<float>& storage() { return data_; }

  bool same_shape(const LinearImage& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }
  bool same_size(int w, int h) const { return width_ == w && height_ == h; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }
  bool is_valid_radiance() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](float v) { return std::isfinite(v) && v >= 0.0f; });
  }

  friend bool operator==(const LinearImage&, const LinearImage&) = default;

 private:
  static void check_shape(int w, int h, int c) {
    if (w < 1 || h < 1) throw std::invalid_argument("LinearImage: dimensions must be positive");
    if (c != 1 && c != 3) throw std::invalid_argument("LinearImage: channels must be 1 or 3");
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

// Single-channel coverage in [0,1].
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, float fill = 1.0f) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw std::invalid_argument("Mask: negative dimensions");
    if (!(fill >= 0.0f && fill <= 1.0f)) throw std::invalid_argument("Mask: coverage outside [0,1]");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  // Takes channel 0 of a 1- or 3-channel image; rejects values outside [0,1].
  static Mask from_image(const LinearImage& img) {
    Mask m(img.width(), img.height(), 0.0f);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        float v = img.at(x, y, 0);
        if (!(v >= -1e-6f && v <= 1.0f + 1e-6f))
          throw std::invalid_argument("Mask: coverage outside [0,1]");
        m.at(x, y) = std::clamp(v, 0.0f, 1.0f);
      }
    return m;
  }

  LinearImage to_image() const {
    return LinearImage(width_, height_, 1, data_);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool matches(const LinearImage& img) const { return img.same_size(width_, height_); }
  bool covered(int x, int y) const { return at(x, y) > 0.0f; }
  double coverage_sum() const {
    double s = 0.0;
    for (float v : data_) s += v;
    return s;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

inline void require_same_shape(const LinearImage& a, const LinearImage& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": image dimensions differ");
}

inline void require_mask(const Mask& m, const LinearImage& img, const char* what) {
  if (!m.matches(img))
    throw std::invalid_argument(std::string(what) + ": mask dimensions differ from image");
}

// Zero every pixel the mask does not cover.
inline void apply_mask_zero(LinearImage& img, const Mask& mask) {
  require_mask(mask, img, "apply_mask_zero");
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!mask.covered(x, y))
        for (int c = 0; c < img.channels(); ++c) img.at(x, y, c) = 0.0f;
}

inline LinearImage scaled(const LinearImage& img, float s) {
  LinearImage out = img;
  for (float& v : out.data()) v *= s;
  return out;
}

inline LinearImage added(const LinearImage& a, const LinearImage& b) {
  require_same_shape(a, b, "added");
  LinearImage out = a;
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return out;
}

// Broadcast a single-channel image to three channels.
inline LinearImage to_rgb(const LinearImage& img) {
  if (img.channels() == 3) return img;
  LinearImage out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, 0);
  return out;
}

}  // namespace relit
