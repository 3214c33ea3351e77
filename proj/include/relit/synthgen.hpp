#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relit/envmap.hpp"
#include "relit/image.hpp"
#include "relit/normals.hpp"
#include "relit/olat.hpp"

namespace relit {

// Analytic toy scenes: spheres seen by an orthographic camera looking down -z.
// No inter-object shadows or interreflections.

struct Sphere {
  double cx = 0.0;     // image-plane center, pixels
  double cy = 0.0;
  double depth = 0.0;  // distance from the camera; smaller is nearer
  double radius = 1.0;
  Rgb albedo = Rgb::Constant(0.5);
  double specular = 0.0;
  double exponent = 1.0;
};

struct SceneSpec {
  int width = 64;
  int height = 64;
  std::vector<Sphere> spheres;

  void validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("SceneSpec: bad resolution");
    if (spheres.empty()) throw std::invalid_argument("SceneSpec: needs at least one sphere");
    for (const auto& s : spheres) {
      if (!(s.radius > 0.0)) throw std::invalid_argument("SceneSpec: radius must be positive");
      if ((s.albedo.array() < 0.0).any() || (s.albedo.array() > 1.0).any())
        throw std::invalid_argument("SceneSpec: albedo outside [0,1]");
      if (s.specular < 0.0 || s.exponent < 1.0) throw std::invalid_argument("SceneSpec: bad specular parameters");
    }
  }
};

inline SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.width = j.value("width", 64);
  s.height = j.value("height", 64);
  for (const auto& e : j.at("spheres")) {
    Sphere sp;
    auto c = e.at("center").get<std::vector<double>>();
    if (c.size() < 2) throw std::invalid_argument("SceneSpec: center needs x, y[, depth]");
    sp.cx = c[0];
    sp.cy = c[1];
    sp.depth = c.size() > 2 ? c[2] : 0.0;
    sp.radius = e.at("radius").get<double>();
    if (e.contains("albedo")) {
      auto a = e.at("albedo").get<std::vector<double>>();
      if (a.size() != 3) throw std::invalid_argument("SceneSpec: albedo needs 3 components");
      sp.albedo = Rgb(a[0], a[1], a[2]);
    }
    sp.specular = e.value("specular", 0.0);
    sp.exponent = e.value("exponent", 1.0);
    s.spheres.push_back(sp);
  }
  s.validate();
  return s;
}

struct SurfaceHit {
  Vec3 normal;
  std::size_t sphere;
};

// Nearest sphere under the image-plane point (px, py); y grows downwards in
// the image and upwards in camera space.
inline std::optional<SurfaceHit> trace(const SceneSpec& scene, double px, double py) {
  std::optional<SurfaceHit> best;
  double best_depth = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.spheres.size(); ++i) {
    const auto& s = scene.spheres[i];
    double dx = (px - s.cx) / s.radius;
    double dy = -(py - s.cy) / s.radius;
    double rr = dx * dx + dy * dy;
    if (rr > 1.0) continue;
    double nz = std::sqrt(std::max(0.0, 1.0 - rr));
    double depth = s.depth - s.radius * nz;
    if (depth < best_depth) {
      best_depth = depth;
      best = SurfaceHit{Vec3(dx, dy, nz).normalized(), i};
    }
  }
  return best;
}

struct Intrinsics {
  NormalMap normals;
  LinearImage albedo;
  Mask mask;
  std::vector<int> sphere_index;  // -1 where uncovered
};

// Pixel-center hit decides normal and albedo; coverage uses 2x2 supersampling.
// Silhouette pixels whose center misses take the first hitting subsample.
inline Intrinsics render_intrinsics(const SceneSpec& scene) {
  scene.validate();
  const int w = scene.width;
  const int h = scene.height;
  Intrinsics out{NormalMap(w, h), LinearImage(w, h, 3), Mask(w, h, 0.0f),
                 std::vector<int>(static_cast<std::size_t>(w) * h, -1)};
  static constexpr double kSub[2] = {0.25, 0.75};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int hits = 0;
      std::optional<SurfaceHit> first;
      for (double sy : kSub)
        for (double sx : kSub)
          if (auto hit = trace(scene, x + sx, y + sy)) {
            ++hits;
            if (!first) first = hit;
          }
      if (!hits) continue;
      auto center = trace(scene, x + 0.5, y + 0.5);
      SurfaceHit hit = center ? *center : *first;
      out.mask.at(x, y) = hits / 4.0f;
      out.normals.set(x, y, hit.normal);
      const Rgb& a = scene.spheres[hit.sphere].albedo;
      for (int c = 0; c < 3; ++c) out.albedo.at(x, y, c) = static_cast<float>(a[c]);
      out.sphere_index[static_cast<std::size_t>(y) * w + x] = static_cast<int>(hit.sphere);
    }
  return out;
}

// Lambert plus Phong about the mirror direction of the +z view.
inline Rgb shade_point(const Sphere& s, const Vec3& n, const Vec3& light) {
  double lambert = std::max(0.0, n.dot(light));
  Vec3 r = 2.0 * n.z() * n - Vec3::UnitZ();
  double spec = s.specular > 0.0 ? s.specular * std::pow(std::max(0.0, r.dot(light)), s.exponent) : 0.0;
  return s.albedo * lambert + Rgb::Constant(spec);
}

inline OlatStack render_olat(const SceneSpec& scene, std::span<const Vec3> directions,
                             const std::string& subject = "synthetic") {
  validate_directions(directions, "render_olat");
  Intrinsics in = render_intrinsics(scene);
  OlatStack stack;
  stack.subject = subject;
  stack.mask = in.mask;
  for (const auto& d : directions) {
    LinearImage frame(scene.width, scene.height, 3);
    for (int y = 0; y < scene.height; ++y)
      for (int x = 0; x < scene.width; ++x) {
        int idx = in.sphere_index[static_cast<std::size_t>(y) * scene.width + x];
        if (idx < 0) continue;
        Rgb v = shade_point(scene.spheres[idx], in.normals.normal(x, y).normalized(), d) * in.mask.at(x, y);
        for (int c = 0; c < 3; ++c) frame.at(x, y, c) = static_cast<float>(v[c]);
      }
    stack.lights.push_back({d, std::move(frame)});
  }
  return stack;
}

// Brute-force reference: direct quadrature of the same shading model over
// every environment texel.
inline LinearImage render_env_reference(const SceneSpec& scene, const EnvironmentMap& env) {
  Intrinsics in = render_intrinsics(scene);
  struct Texel {
    Vec3 dir;
    Rgb weighted;  // L * solid angle
  };
  std::vector<Texel> texels;
  for (int y = 0; y < env.height(); ++y) {
    double dw = texel_solid_angle(env, y);
    for (int x = 0; x < env.width(); ++x) {
      Rgb l = env.texel(x, y);
      if (l.isZero()) continue;
      texels.push_back({texel_direction(env.width(), env.height(), x, y), l * dw});
    }
  }
  LinearImage out(scene.width, scene.height, 3);
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      int idx = in.sphere_index[static_cast<std::size_t>(y) * scene.width + x];
      if (idx < 0) continue;
      const Sphere& s = scene.spheres[idx];
      Vec3 n = in.normals.normal(x, y).normalized();
      Vec3 r = 2.0 * n.z() * n - Vec3::UnitZ();
      Rgb acc = Rgb::Zero();
      for (const auto& t : texels) {
        double lambert = n.dot(t.dir);
        double spec = s.specular > 0.0 ? s.specular * std::pow(std::max(0.0, r.dot(t.dir)), s.exponent) : 0.0;
        if (lambert <= 0.0 && spec <= 0.0) continue;
        acc += (s.albedo * std::max(0.0, lambert) + Rgb::Constant(spec)).cwiseProduct(t.weighted);
      }
      acc *= in.mask.at(x, y);
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = static_cast<float>(acc[c]);
    }
  return out;
}

// Near-uniform directions on the sphere (golden-angle spiral).
inline std::vector<Vec3> fibonacci_sphere(int n) {
  if (n < 1) throw std::invalid_argument("fibonacci_sphere: n must be >= 1");
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    dirs.push_back(Vec3(r * std::cos(phi), r * std::sin(phi), z).normalized());
  }
  return dirs;
}

// ---------------------------------------------------------------------------
// Analytic environments

inline EnvironmentMap make_constant_env(int height, const Rgb& value) { return EnvironmentMap(height, value); }

inline EnvironmentMap make_hot_texel_env(int height, int tx, int ty, const Rgb& value) {
  EnvironmentMap base(height, Rgb::Zero());
  LinearImage img = base.image();
  if (tx < 0 || tx >= img.width() || ty < 0 || ty >= img.height())
    throw std::invalid_argument("make_hot_texel_env: texel out of range");
  for (int c = 0; c < 3; ++c) img.at(tx, ty, c) = static_cast<float>(value[c]);
  return EnvironmentMap(std::move(img));
}

struct SunSkyParams {
  Vec3 sun_direction = Vec3(0.3, 0.2, 0.93).normalized();
  double sun_radius = 0.1;     // angular radius, radians
  double sun_softness = 0.02;  // width of the smoothstep edge, radians
  Rgb sun_radiance = Rgb(50.0, 45.0, 40.0);
  Rgb zenith = Rgb(0.3, 0.45, 0.8);
  Rgb horizon = Rgb(0.9, 0.85, 0.8);
  Rgb ground = Rgb(0.2, 0.18, 0.15);
};

// Gradient sky over the upper (+z) hemisphere, flat ground below, plus a
// disk around the sun direction with a smoothstep rim.
inline EnvironmentMap make_sun_sky_env(int height, const SunSkyParams& p = {}) {
  LinearImage img(2 * height, height, 3);
  const Vec3 sun = p.sun_direction.normalized();
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < 2 * height; ++x) {
      Vec3 d = texel_direction(2 * height, height, x, y);
      Rgb v;
      if (d.z() >= 0.0) {
        double t = std::sqrt(d.z());
        v = p.horizon * (1.0 - t) + p.zenith * t;
      } else {
        v = p.ground;
      }
      double ang = std::acos(std::clamp(d.dot(sun), -1.0, 1.0));
      double edge0 = p.sun_radius + 0.5 * p.sun_softness;
      double edge1 = p.sun_radius - 0.5 * p.sun_softness;
      double s;
      if (p.sun_softness <= 0.0) {
        s = ang <= p.sun_radius ? 1.0 : 0.0;
      } else {
        double t = std::clamp((edge0 - ang) / (edge0 - edge1), 0.0, 1.0);
        s = t * t * (3.0 - 2.0 * t);
      }
      v += s * p.sun_radiance;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(v[c]);
    }
  return EnvironmentMap(std::move(img));
}

// kind in {constant, sun_sky, hot_texel}; params as JSON.
inline EnvironmentMap make_env(const std::string& kind, const nlohmann::json& params = nlohmann::json::object()) {
  int height = params.value("height", 64);
  auto rgb = [&](const char* key, Rgb def) {
    if (!params.contains(key)) return def;
    const auto& v = params.at(key);
    if (v.is_number()) return Rgb::Constant(v.get<double>()).eval();
    auto a = v.get<std::vector<double>>();
    if (a.size() != 3) throw std::invalid_argument(std::string("make_env: ") + key + " needs 3 components");
    return Rgb(a[0], a[1], a[2]);
  };
  if (kind == "constant") return make_constant_env(height, rgb("value", Rgb::Ones()));
  if (kind == "hot_texel")
    return make_hot_texel_env(height, params.value("x", 0), params.value("y", height / 2), rgb("value", Rgb::Ones()));
  if (kind == "sun_sky") {
    SunSkyParams p;
    if (params.contains("sun_direction")) {
      auto d = params.at("sun_direction").get<std::vector<double>>();
      if (d.size() != 3) throw std::invalid_argument("make_env: sun_direction needs 3 components");
      p.sun_direction = normalized_or_throw(Vec3(d[0], d[1], d[2]), "make_env");
    }
    p.sun_radius = params.value("sun_radius", p.sun_radius);
    p.sun_softness = params.value("sun_softness", p.sun_softness);
    p.sun_radiance = rgb("sun_radiance", p.sun_radiance);
    p.zenith = rgb("zenith", p.zenith);
    p.horizon = rgb("horizon", p.horizon);
    p.ground = rgb("ground", p.ground);
    return make_sun_sky_env(height, p);
  }
  throw std::invalid_argument("make_env: unknown kind '" + kind + "'");
}

}  // namespace relit
