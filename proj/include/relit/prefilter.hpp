#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relit/envmap.hpp"
#include "relit/image.hpp"
#include "relit/io.hpp"
#include "relit/normals.hpp"

namespace relit {

inline const std::vector<double> kDefaultExponents = {1.0, 16.0, 32.0, 64.0};
inline constexpr int kDefaultPrefilterHeight = 32;

struct PrefilterOptions {
  int out_height = kDefaultPrefilterHeight;
  // Sources taller than this are box-reduced (solid-angle weighted) first.
  int max_source_height = 64;
};

struct SpecularLobe {
  double exponent = 1.0;
  LinearImage table;
};

struct PrefilteredEnv {
  LinearImage diffuse;
  std::vector<SpecularLobe> specular;
  double rotation = 0.0;
};

// Halves an equirectangular table while preserving its integral: rows are
// weighted by their solid angle.
inline LinearImage halve_latlong(const LinearImage& img) {
  const int w = img.width() / 2;
  const int h = img.height() / 2;
  LinearImage out(w, h, img.channels());
  for (int y = 0; y < h; ++y) {
    double a0 = texel_solid_angle(img.width(), img.height(), 2 * y);
    double a1 = texel_solid_angle(img.width(), img.height(), 2 * y + 1);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double top = static_cast<double>(img.at(2 * x, 2 * y, c)) + img.at(2 * x + 1, 2 * y, c);
        double bot = static_cast<double>(img.at(2 * x, 2 * y + 1, c)) + img.at(2 * x + 1, 2 * y + 1, c);
        out.at(x, y, c) = static_cast<float>((a0 * top + a1 * bot) / (2.0 * (a0 + a1)));
      }
  }
  return out;
}

namespace detail {

struct QuadratureTexel {
  Vec3 dir;
  double solid_angle;
  Rgb radiance;
};

inline std::vector<QuadratureTexel> quadrature_texels(const EnvironmentMap& env, int max_height) {
  LinearImage src = env.image();
  while (src.height() > max_height && src.height() % 2 == 0) src = halve_latlong(src);
  std::vector<QuadratureTexel> out;
  out.reserve(src.pixel_count());
  for (int y = 0; y < src.height(); ++y) {
    double dw = texel_solid_angle(src.width(), src.height(), y);
    for (int x = 0; x < src.width(); ++x)
      out.push_back({texel_direction(src.width(), src.height(), x, y), dw,
                     Rgb(src.at(x, y, 0), src.at(x, y, 1), src.at(x, y, 2))});
  }
  return out;
}

template <class LobeFn>
LinearImage convolve_latlong(const std::vector<QuadratureTexel>& src, int out_height, LobeFn lobe,
                             bool normalize) {
  if (out_height < 8) throw std::invalid_argument("prefilter: out_height must be >= 8");
  LinearImage out(2 * out_height, out_height, 3);
  for (int y = 0; y < out_height; ++y)
    for (int x = 0; x < 2 * out_height; ++x) {
      Vec3 axis = texel_direction(2 * out_height, out_height, x, y);
      Rgb acc = Rgb::Zero();
      double weight = 0.0;
      for (const auto& t : src) {
        double c = axis.dot(t.dir);
        if (c <= 0.0) continue;
        double k = lobe(c) * t.solid_angle;
        acc += k * t.radiance;
        weight += k;
      }
      if (normalize) acc = weight > 0.0 ? Rgb(acc / weight) : Rgb::Zero();
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  return out;
}

}  // namespace detail

// Irradiance table D(n) = sum L(w) max(0, n.w) dw.
inline LinearImage prefilter_diffuse(const EnvironmentMap& env, int out_height = kDefaultPrefilterHeight,
                                     int max_source_height = PrefilterOptions{}.max_source_height) {
  auto src = detail::quadrature_texels(env, max_source_height);
  return detail::convolve_latlong(src, out_height, [](double c) { return c; }, false);
}

// Phong lobe table. Normalized so a constant environment maps to itself;
// `normalize = false` returns the raw numerator sum L(w) max(0, r.w)^n dw.
inline LinearImage prefilter_specular(const EnvironmentMap& env, double exponent,
                                      int out_height = kDefaultPrefilterHeight, bool normalize = true,
                                      int max_source_height = PrefilterOptions{}.max_source_height) {
  if (!(exponent >= 1.0)) throw std::invalid_argument("prefilter_specular: exponent must be >= 1");
  auto src = detail::quadrature_texels(env, max_source_height);
  return detail::convolve_latlong(
      src, out_height, [exponent](double c) { return std::pow(c, exponent); }, normalize);
}

inline PrefilteredEnv prefilter(const EnvironmentMap& env, const std::vector<double>& exponents = kDefaultExponents,
                                const PrefilterOptions& opts = {}, double rotation_tag = 0.0) {
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    if (!(exponents[i] >= 1.0)) throw std::invalid_argument("prefilter: exponent must be >= 1");
    if (i > 0 && !(exponents[i] > exponents[i - 1]))
      throw std::invalid_argument("prefilter: exponents must be strictly increasing");
  }
  auto src = detail::quadrature_texels(env, opts.max_source_height);
  PrefilteredEnv pf;
  pf.rotation = rotation_tag;
  pf.diffuse = detail::convolve_latlong(src, opts.out_height, [](double c) { return c; }, false);
  for (double n : exponents)
    pf.specular.push_back(
        {n, detail::convolve_latlong(src, opts.out_height, [n](double c) { return std::pow(c, n); }, true)});
  return pf;
}

// ---------------------------------------------------------------------------
// Light maps

inline LinearImage light_map_diffuse(const NormalMap& normals, const PrefilteredEnv& pf, const Mask& mask) {
  require_mask(mask, normals.encoded(), "light_map_diffuse");
  LinearImage out(normals.width(), normals.height(), 3);
  for (int y = 0; y < normals.height(); ++y)
    for (int x = 0; x < normals.width(); ++x) {
      if (!mask.covered(x, y)) continue;
      Rgb v = sample_uv(pf.diffuse, dir_to_uv(normals.normal(x, y)));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(v[c]);
    }
  return out;
}

inline Vec3 reflect_about(const Vec3& n, const Vec3& v) { return 2.0 * n.dot(v) * n - v; }

inline LinearImage light_map_specular(const NormalMap& normals, const PrefilteredEnv& pf, std::size_t lobe,
                                      const Vec3& view, const Mask& mask) {
  require_mask(mask, normals.encoded(), "light_map_specular");
  if (lobe >= pf.specular.size()) throw std::out_of_range("light_map_specular: lobe index out of range");
  if (std::abs(view.norm() - 1.0) > 1e-6) throw std::invalid_argument("light_map_specular: view must be unit length");
  const LinearImage& table = pf.specular[lobe].table;
  LinearImage out(normals.width(), normals.height(), 3);
  for (int y = 0; y < normals.height(); ++y)
    for (int x = 0; x < normals.width(); ++x) {
      if (!mask.covered(x, y)) continue;
      Vec3 n = normals.normal(x, y).normalized();
      Rgb v = sample_uv(table, dir_to_uv(reflect_about(n, view)));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(v[c]);
    }
  return out;
}

inline LinearImage light_map_specular(const NormalMap& normals, const PrefilteredEnv& pf, std::size_t lobe,
                                      const Mask& mask) {
  return light_map_specular(normals, pf, lobe, Vec3::UnitZ(), mask);
}

// ---------------------------------------------------------------------------
// Composition

struct WeightMaps {
  LinearImage diffuse;                // 1 channel, [0,1]
  std::vector<LinearImage> specular;  // 1 channel each, [0,1]
  LinearImage residual;               // 3 channels, signed
};

// I = w_d * albedo * L_d + sum_k w_k * S_k + R, clamped at 0, zero outside the mask.
inline LinearImage compose_render(const LinearImage& albedo, const LinearImage& diffuse_light,
                                  const std::vector<LinearImage>& specular_maps, const WeightMaps& weights,
                                  const Mask& mask) {
  const int w = albedo.width();
  const int h = albedo.height();
  auto check = [&](const LinearImage& img, int channels, const char* what) {
    if (!img.same_size(w, h) || img.channels() != channels)
      throw std::invalid_argument(std::string("compose_render: dimension mismatch in ") + what);
  };
  check(albedo, 3, "albedo");
  check(diffuse_light, 3, "diffuse light map");
  check(weights.diffuse, 1, "diffuse weight");
  check(weights.residual, 3, "residual");
  if (specular_maps.size() != weights.specular.size())
    throw std::invalid_argument("compose_render: specular map and weight counts differ");
  for (std::size_t k = 0; k < specular_maps.size(); ++k) {
    check(specular_maps[k], 3, "specular light map");
    check(weights.specular[k], 1, "specular weight");
  }
  require_mask(mask, albedo, "compose_render");

  LinearImage out(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask.covered(x, y)) continue;
      const double wd = weights.diffuse.at(x, y);
      for (int c = 0; c < 3; ++c) {
        double v = wd * albedo.at(x, y, c) * diffuse_light.at(x, y, c);
        for (std::size_t k = 0; k < specular_maps.size(); ++k)
          v += static_cast<double>(weights.specular[k].at(x, y)) * specular_maps[k].at(x, y, c);
        v += weights.residual.at(x, y, c);
        out.at(x, y, c) = static_cast<float>(std::max(0.0, v));
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: directory with diffuse.pfm, specular_<k>.pfm and prefilter.json.

inline void save_prefiltered(const std::filesystem::path& dir, const PrefilteredEnv& pf) {
  std::filesystem::create_directories(dir);
  write_pfm(dir / "diffuse.pfm", pf.diffuse);
  nlohmann::json j;
  j["rotation"] = pf.rotation;
  j["diffuse"] = "diffuse.pfm";
  j["specular"] = nlohmann::json::array();
  for (std::size_t k = 0; k < pf.specular.size(); ++k) {
    std::string name = "specular_" + std::to_string(k) + ".pfm";
    write_pfm(dir / name, pf.specular[k].table);
    j["specular"].push_back({{"exponent", pf.specular[k].exponent}, {"file", name}});
  }
  j["exponents"] = nlohmann::json::array();
  for (const auto& s : pf.specular) j["exponents"].push_back(s.exponent);
  std::ofstream(dir / "prefilter.json") << j.dump(2) << '\n';
}

inline PrefilteredEnv load_prefiltered(const std::filesystem::path& dir) {
  std::ifstream in(dir / "prefilter.json");
  if (!in) throw IoError("missing prefilter.json in " + dir.string());
  nlohmann::json j = nlohmann::json::parse(in);
  PrefilteredEnv pf;
  pf.rotation = j.value("rotation", 0.0);
  pf.diffuse = read_pfm(dir / j.at("diffuse").get<std::string>());
  for (const auto& s : j.at("specular"))
    pf.specular.push_back({s.at("exponent").get<double>(), read_pfm(dir / s.at("file").get<std::string>())});
  return pf;
}

}  // namespace relit
