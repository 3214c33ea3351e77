#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "relit/image.hpp"

namespace relit {

using Vec3 = Eigen::Vector3d;
using Rgb = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;

// Equirectangular HDR panorama. Row 0 is the zenith (+z); u in [0,1) maps to
// azimuth phi = 2*pi*u measured from +x towards +y; v in [0,1] maps to polar
// angle theta = pi*v. Texel (i, j) has its center at ((i+0.5)/W, (j+0.5)/H).
class EnvironmentMap {
 public:
  EnvironmentMap() = default;
  explicit EnvironmentMap(LinearImage image) : image_(std::move(image)) {
    if (image_.channels() != 3) throw std::invalid_argument("EnvironmentMap: needs 3 channels");
    if (image_.height() < 1 || image_.width() != 2 * image_.height())
      throw std::invalid_argument("EnvironmentMap: width must equal 2*height");
    if (!image_.is_valid_radiance())
      throw std::invalid_argument("EnvironmentMap: radiance must be finite and non-negative");
  }
  EnvironmentMap(int height, const Rgb& fill) : EnvironmentMap(LinearImage(2 * height, height, 3)) {
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < 2 * height; ++x)
        for (int c = 0; c < 3; ++c) image_.at(x, y, c) = static_cast<float>(fill[c]);
  }

  const LinearImage& image() const { return image_; }
  int width() const { return image_.width(); }
  int height() const { return image_.height(); }
  Rgb texel(int x, int y) const {
    return {image_.at(x, y, 0), image_.at(x, y, 1), image_.at(x, y, 2)};
  }

 private:
  LinearImage image_;
};

struct Uv {
  double u = 0.0;
  double v = 0.0;
};

inline Vec3 normalized_or_throw(const Vec3& d, const char* what) {
  double n = d.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument(std::string(what) + ": zero-length direction");
  return d / n;
}

inline Uv dir_to_uv(const Vec3& direction) {
  Vec3 d = normalized_or_throw(direction, "dir_to_uv");
  double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
  double phi = std::atan2(d.y(), d.x());
  if (phi < 0.0) phi += kTwoPi;
  double u = phi / kTwoPi;
  if (u >= 1.0) u -= 1.0;
  return {u, theta / kPi};
}

inline Vec3 uv_to_dir(const Uv& uv) {
  double phi = kTwoPi * uv.u;
  double theta = kPi * uv.v;
  double s = std::sin(theta);
  return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

inline Vec3 texel_direction(int width, int height, int x, int y) {
  return uv_to_dir({(x + 0.5) / width, (y + 0.5) / height});
}

// Exact area of the latitude band slice covered by one texel in `row`.
inline double texel_solid_angle(int width, int height, int row) {
  if (row < 0 || row >= height) throw std::out_of_range("texel_solid_angle: row out of range");
  double t0 = kPi * row / height;
  double t1 = kPi * (row + 1) / height;
  return (kTwoPi / width) * (std::cos(t0) - std::cos(t1));
}

inline double texel_solid_angle(const EnvironmentMap& env, int row) {
  return texel_solid_angle(env.width(), env.height(), row);
}

// Bilinear lookup in continuous texel coordinates; azimuth wraps, rows clamp.
inline Rgb sample_texels(const LinearImage& img, double fx, double fy) {
  const int w = img.width();
  const int h = img.height();
  fx -= 0.5;
  fy = std::clamp(fy - 0.5, 0.0, static_cast<double>(h - 1));
  double x0f = std::floor(fx);
  double y0f = std::floor(fy);
  double tx = fx - x0f;
  double ty = fy - y0f;
  int x0 = static_cast<int>(x0f) % w;
  if (x0 < 0) x0 += w;
  int x1 = (x0 + 1) % w;
  int y0 = static_cast<int>(y0f);
  int y1 = std::min(y0 + 1, h - 1);
  Rgb out;
  for (int c = 0; c < img.channels() && c < 3; ++c) {
    double a = img.at(x0, y0, c) + tx * (static_cast<double>(img.at(x1, y0, c)) - img.at(x0, y0, c));
    double b = img.at(x0, y1, c) + tx * (static_cast<double>(img.at(x1, y1, c)) - img.at(x0, y1, c));
    out[c] = a + ty * (b - a);
  }
  if (img.channels() == 1) out[1] = out[2] = out[0];
  return out;
}

inline Rgb sample_uv(const LinearImage& img, const Uv& uv) {
  return sample_texels(img, uv.u * img.width(), uv.v * img.height());
}

inline Rgb sample_env(const EnvironmentMap& env, const Vec3& direction) {
  return sample_uv(env.image(), dir_to_uv(direction));
}

inline Mat3 yaw_matrix(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

// Resample a lat-long table so that out(d) = in(R^-1 d).
inline LinearImage rotate_latlong(const LinearImage& img, const Mat3& rotation) {
  LinearImage out(img.width(), img.height(), img.channels());
  const Mat3 inv = rotation.transpose();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      Rgb v = sample_uv(img, dir_to_uv(inv * texel_direction(img.width(), img.height(), x, y)));
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = static_cast<float>(v[c]);
    }
  return out;
}

// Yaw about +z is a pure azimuthal shift, so it is resampled along rows only.
inline LinearImage rotate_latlong(const LinearImage& img, double yaw) {
  const int w = img.width();
  double shift = std::fmod(yaw / kTwoPi, 1.0);
  if (shift < 0.0) shift += 1.0;
  if (shift == 0.0) return img;
  LinearImage out(w, img.height(), img.channels());
  const double ds = shift * w;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < w; ++x) {
      double src = x - ds;
      double f = std::floor(src);
      double t = src - f;
      int x0 = static_cast<int>(f) % w;
      if (x0 < 0) x0 += w;
      int x1 = (x0 + 1) % w;
      for (int c = 0; c < img.channels(); ++c) {
        double a = img.at(x0, y, c);
        double b = img.at(x1, y, c);
        out.at(x, y, c) = static_cast<float>(a + t * (b - a));
      }
    }
  return out;
}

inline EnvironmentMap rotate_env(const EnvironmentMap& env, double yaw) {
  return EnvironmentMap(rotate_latlong(env.image(), yaw));
}

inline EnvironmentMap rotate_env(const EnvironmentMap& env, const Mat3& rotation) {
  return EnvironmentMap(rotate_latlong(env.image(), rotation));
}

inline EnvironmentMap scaled(const EnvironmentMap& env, float s) {
  return EnvironmentMap(scaled(env.image(), s));
}

inline EnvironmentMap added(const EnvironmentMap& a, const EnvironmentMap& b) {
  return EnvironmentMap(added(a.image(), b.image()));
}

}  // namespace relit
