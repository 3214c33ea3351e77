#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "relit/envmap.hpp"
#include "relit/image.hpp"
#include "relit/io.hpp"
#include "relit/normals.hpp"

namespace relit {

struct OlatLight {
  Vec3 direction;  // unit vector pointing towards the light
  LinearImage frame;
};

// Reflectance field: one frame per light direction plus the subject mask.
struct OlatStack {
  std::string subject;
  std::vector<OlatLight> lights;
  Mask mask;

  int width() const { return mask.width(); }
  int height() const { return mask.height(); }

  std::vector<Vec3> directions() const {
    std::vector<Vec3> d;
    d.reserve(lights.size());
    for (const auto& l : lights) d.push_back(l.direction);
    return d;
  }

  void validate() const {
    if (lights.empty()) throw std::invalid_argument("OlatStack: no lights");
    for (std::size_t i = 0; i < lights.size(); ++i) {
      const auto& l = lights[i];
      if (!mask.matches(l.frame) || l.frame.channels() != 3)
        throw std::invalid_argument("OlatStack: frame " + std::to_string(i) + " dimension mismatch");
      if (std::abs(l.direction.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("OlatStack: direction " + std::to_string(i) + " not normalized");
      for (std::size_t j = 0; j < i; ++j) {
        double c = std::clamp(l.direction.dot(lights[j].direction), -1.0, 1.0);
        if (std::acos(c) <= 1e-4) throw std::invalid_argument("OlatStack: duplicate light directions");
      }
    }
  }
};

inline void validate_directions(std::span<const Vec3> dirs, const char* what) {
  if (dirs.empty()) throw std::invalid_argument(std::string(what) + ": empty direction list");
  for (const auto& d : dirs)
    if (std::abs(d.norm() - 1.0) > 1e-6) throw std::invalid_argument(std::string(what) + ": direction not normalized");
}

// Equal-area quadrature: w_i = E(R^-1 d_i) * 4*pi/N.
inline std::vector<Rgb> olat_weights(const EnvironmentMap& env, std::span<const Vec3> dirs,
                                     const Mat3& rotation = Mat3::Identity()) {
  validate_directions(dirs, "olat_weights");
  const double dw = kFourPi / static_cast<double>(dirs.size());
  const Mat3 inv = rotation.transpose();
  std::vector<Rgb> w;
  w.reserve(dirs.size());
  for (const auto& d : dirs) w.push_back(sample_env(env, inv * d) * dw);
  return w;
}

// Fixed accumulation order over lights for every pixel, in double precision.
inline LinearImage relight_with_weights(const OlatStack& stack, std::span<const Rgb> weights) {
  stack.validate();
  if (weights.size() != stack.lights.size())
    throw std::invalid_argument("relight_with_weights: weight count differs from light count");
  const std::size_t n = static_cast<std::size_t>(stack.width()) * stack.height();
  std::vector<double> acc(n * 3, 0.0);
  for (std::size_t i = 0; i < stack.lights.size(); ++i) {
    const Rgb& w = weights[i];
    if (w.isZero()) continue;
    auto f = stack.lights[i].frame.data();
    for (std::size_t p = 0; p < n; ++p) {
      acc[3 * p + 0] += w[0] * f[3 * p + 0];
      acc[3 * p + 1] += w[1] * f[3 * p + 1];
      acc[3 * p + 2] += w[2] * f[3 * p + 2];
    }
  }
  LinearImage out(stack.width(), stack.height(), 3);
  auto o = out.data();
  for (std::size_t i = 0; i < acc.size(); ++i) o[i] = static_cast<float>(acc[i]);
  apply_mask_zero(out, stack.mask);
  return out;
}

inline LinearImage relight_superposition(const OlatStack& stack, const EnvironmentMap& env,
                                         const Mat3& rotation = Mat3::Identity()) {
  stack.validate();
  auto dirs = stack.directions();
  auto w = olat_weights(env, dirs, rotation);
  return relight_with_weights(stack, w);
}

inline LinearImage relight_superposition(const OlatStack& stack, const EnvironmentMap& env, double yaw) {
  return relight_superposition(stack, env, yaw_matrix(yaw));
}

// Uniform unit illumination divided by pi, so Lambertian subjects give reflectance.
inline LinearImage flat_lit_albedo(const OlatStack& stack) {
  stack.validate();
  const double w = kFourPi / static_cast<double>(stack.lights.size()) / kPi;
  std::vector<Rgb> weights(stack.lights.size(), Rgb::Constant(w));
  return relight_with_weights(stack, weights);
}

// ---------------------------------------------------------------------------
// Photometric stereo

inline constexpr double kDefaultShadowThreshold = 0.01;

struct PhotometricStereoResult {
  NormalMap normals;
  LinearImage albedo;
  Mask valid;  // input coverage where a solution exists, 0 elsewhere
};

inline double direction_condition_number(std::span<const Vec3> dirs) {
  Eigen::MatrixXd a(dirs.size(), 3);
  for (std::size_t i = 0; i < dirs.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = dirs[i].transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() < 3 || s(2) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(2);
}

// Per-pixel least squares of I_i = b . d_i over lights brighter than
// `shadow_threshold` times the pixel's brightest observation.
inline PhotometricStereoResult photometric_stereo(const OlatStack& stack,
                                                  double shadow_threshold = kDefaultShadowThreshold) {
  stack.validate();
  auto dirs = stack.directions();
  if (dirs.size() < 3) throw std::invalid_argument("photometric_stereo: needs at least 3 lights");
  if (!(direction_condition_number(dirs) < 1e3))
    throw std::invalid_argument("photometric_stereo: degenerate (coplanar) light directions");

  const int w = stack.width();
  const int h = stack.height();
  const std::size_t nl = dirs.size();
  PhotometricStereoResult r{NormalMap(w, h), LinearImage(w, h, 3), Mask(w, h, 0.0f)};
  std::vector<double> gray(nl);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!stack.mask.covered(x, y)) continue;
      double peak = 0.0;
      for (std::size_t i = 0; i < nl; ++i) {
        const auto& f = stack.lights[i].frame;
        gray[i] = (static_cast<double>(f.at(x, y, 0)) + f.at(x, y, 1) + f.at(x, y, 2)) / 3.0;
        peak = std::max(peak, gray[i]);
      }
      if (!(peak > 0.0)) continue;
      const double cut = shadow_threshold * peak;
      Mat3 ata = Mat3::Zero();
      Eigen::Matrix3d atb = Eigen::Matrix3d::Zero();  // column c = A^T I_c
      int used = 0;
      for (std::size_t i = 0; i < nl; ++i) {
        if (!(gray[i] > cut)) continue;
        const Vec3& d = dirs[i];
        ata += d * d.transpose();
        const auto& f = stack.lights[i].frame;
        for (int c = 0; c < 3; ++c) atb.col(c) += d * static_cast<double>(f.at(x, y, c));
        ++used;
      }
      if (used < 3) continue;
      Eigen::SelfAdjointEigenSolver<Mat3> eig(ata, Eigen::EigenvaluesOnly);
      const auto& ev = eig.eigenvalues();
      if (!(ev(0) > 1e-6 * ev(2))) continue;
      Eigen::Matrix3d b = ata.ldlt().solve(atb);
      Vec3 bg = b.rowwise().sum() / 3.0;
      double norm = bg.norm();
      if (!(norm > 0.0)) continue;
      Vec3 n = bg / norm;
      r.normals.set(x, y, n);
      for (int c = 0; c < 3; ++c) r.albedo.at(x, y, c) = static_cast<float>(std::max(0.0, n.dot(b.col(c))));
      r.valid.at(x, y) = stack.mask.at(x, y);
    }
  return r;
}

// ---------------------------------------------------------------------------
// Manifest: {subject, width, height, lights:[{dir:[x,y,z], file}], mask_file}
// with file paths relative to the manifest's directory.

struct OlatManifestLight {
  Vec3 direction;
  std::string file;
};

struct OlatManifest {
  std::string subject;
  int width = 0;
  int height = 0;
  std::vector<OlatManifestLight> lights;
  std::string mask_file;
  std::filesystem::path base_dir;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["subject"] = subject;
    j["width"] = width;
    j["height"] = height;
    j["lights"] = nlohmann::json::array();
    for (const auto& l : lights)
      j["lights"].push_back({{"dir", {l.direction.x(), l.direction.y(), l.direction.z()}}, {"file", l.file}});
    j["mask_file"] = mask_file;
    return j;
  }
};

inline OlatManifest read_olat_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OLAT manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("OLAT manifest " + path.string() + ": " + e.what());
  }
  OlatManifest m;
  m.base_dir = path.parent_path();
  m.subject = j.value("subject", std::string{});
  m.width = j.at("width").get<int>();
  m.height = j.at("height").get<int>();
  m.mask_file = j.at("mask_file").get<std::string>();
  for (const auto& l : j.at("lights")) {
    auto d = l.at("dir").get<std::vector<double>>();
    if (d.size() != 3) throw IoError("OLAT manifest: dir must have 3 components");
    m.lights.push_back({Vec3(d[0], d[1], d[2]), l.at("file").get<std::string>()});
  }
  return m;
}

inline OlatStack load_olat_stack(const OlatManifest& m) {
  OlatStack s;
  s.subject = m.subject;
  s.mask = read_mask(m.base_dir / m.mask_file);
  if (s.mask.width() != m.width || s.mask.height() != m.height)
    throw IoError("OLAT manifest: mask size differs from declared size");
  for (const auto& l : m.lights) s.lights.push_back({l.direction, to_rgb(read_pfm(m.base_dir / l.file))});
  s.validate();
  return s;
}

inline OlatStack load_olat_stack(const std::filesystem::path& manifest_path) {
  return load_olat_stack(read_olat_manifest(manifest_path));
}

inline OlatManifest save_olat_stack(const std::filesystem::path& dir, const OlatStack& stack) {
  std::filesystem::create_directories(dir);
  OlatManifest m;
  m.subject = stack.subject;
  m.width = stack.width();
  m.height = stack.height();
  m.mask_file = "mask.pfm";
  m.base_dir = dir;
  write_pfm(dir / m.mask_file, stack.mask.to_image());
  for (std::size_t i = 0; i < stack.lights.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "olat_%03zu.pfm", i);
    write_pfm(dir / name, stack.lights[i].frame);
    m.lights.push_back({stack.lights[i].direction, name});
  }
  std::ofstream(dir / "manifest.json") << m.to_json().dump(2) << '\n';
  return m;
}

// Streams frames from disk one at a time; only the accumulator stays resident.
inline LinearImage relight_streamed(const OlatManifest& m, const EnvironmentMap& env,
                                    const Mat3& rotation = Mat3::Identity()) {
  Mask mask = read_mask(m.base_dir / m.mask_file);
  std::vector<Vec3> dirs;
  for (const auto& l : m.lights) dirs.push_back(l.direction);
  auto w = olat_weights(env, dirs, rotation);
  const std::size_t n = static_cast<std::size_t>(m.width) * m.height;
  std::vector<double> acc(n * 3, 0.0);
  for (std::size_t i = 0; i < m.lights.size(); ++i) {
    if (w[i].isZero()) continue;
    LinearImage f = to_rgb(read_pfm(m.base_dir / m.lights[i].file));
    if (!f.same_size(m.width, m.height)) throw IoError("OLAT frame " + m.lights[i].file + " has wrong size");
    auto d = f.data();
    for (std::size_t p = 0; p < n; ++p)
      for (int c = 0; c < 3; ++c) acc[3 * p + c] += w[i][c] * d[3 * p + c];
  }
  LinearImage out(m.width, m.height, 3);
  auto o = out.data();
  for (std::size_t i = 0; i < acc.size(); ++i) o[i] = static_cast<float>(acc[i]);
  apply_mask_zero(out, mask);
  return out;
}

}  // namespace relit
