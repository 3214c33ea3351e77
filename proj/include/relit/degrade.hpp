#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relit/color.hpp"
#include "relit/convolve.hpp"
#include "relit/envmap.hpp"
#include "relit/image.hpp"
#include "relit/normals.hpp"

namespace relit {

using Rng = std::mt19937_64;

// Per-sample seed for batch processing.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ index; }

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  void validate(const char* what) const {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument(std::string("empty or invalid range for ") + what);
  }
  double sample(Rng& rng) const {
    if (lo == hi) {
      rng.discard(1);
      return lo;
    }
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  }
  int sample_int(Rng& rng) const {
    return std::uniform_int_distribution<int>(static_cast<int>(std::lround(lo)), static_cast<int>(std::lround(hi)))(rng);
  }
};

// ---------------------------------------------------------------------------
// Point spread functions

enum class PsfKind { Moffat, Exponential };

inline const char* to_string(PsfKind k) { return k == PsfKind::Moffat ? "moffat" : "exponential"; }

inline PsfKind psf_kind_from_string(const std::string& s) {
  if (s == "moffat") return PsfKind::Moffat;
  if (s == "exponential") return PsfKind::Exponential;
  throw std::invalid_argument("unknown PSF kind '" + s + "'");
}

// Unnormalized radial profiles.
inline double moffat_profile(double r, double sigma, double beta) {
  return std::pow(1.0 + r * r / (sigma * sigma), -beta);
}
inline double exponential_profile(double r, double sigma, double beta) {
  return std::exp(-std::pow(r, beta) / (sigma * sigma));
}

inline double psf_profile(PsfKind kind, double r, double sigma, double beta) {
  return kind == PsfKind::Moffat ? moffat_profile(r, sigma, beta) : exponential_profile(r, sigma, beta);
}

// Radius enclosing 99.9% of the analytic 2D mass, capped at `cap`. Moffat
// profiles with beta <= 1 have unbounded mass and always return the cap.
inline int psf_support_radius(PsfKind kind, double sigma, double beta, int cap) {
  constexpr double kMass = 0.999;
  double radius;
  if (kind == PsfKind::Moffat) {
    if (beta <= 1.0) return std::max(1, cap);
    radius = sigma * std::sqrt(std::pow(1.0 - kMass, -1.0 / (beta - 1.0)) - 1.0);
  } else {
    // Integrate K(r) 2 pi r dr numerically out to where the profile is negligible.
    const double rmax = std::pow(60.0 * sigma * sigma, 1.0 / beta);
    const int steps = 20000;
    const double dr = rmax / steps;
    std::vector<double> cum(steps + 1, 0.0);
    for (int i = 1; i <= steps; ++i) {
      double r0 = (i - 1) * dr, r1 = i * dr;
      cum[i] = cum[i - 1] + 0.5 * dr * (exponential_profile(r0, sigma, beta) * r0 + exponential_profile(r1, sigma, beta) * r1);
    }
    auto it = std::lower_bound(cum.begin(), cum.end(), kMass * cum.back());
    radius = static_cast<double>(it - cum.begin()) * dr;
  }
  if (!std::isfinite(radius)) return std::max(1, cap);
  return std::clamp(static_cast<int>(std::ceil(radius)), 1, std::max(1, cap));
}

inline Kernel radial_psf(PsfKind kind, double sigma, double beta, int radius) {
  if (!(sigma > 0.0)) throw std::invalid_argument("psf: sigma must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("psf: beta must be positive");
  if (radius < 1) throw std::invalid_argument("psf: support radius must be >= 1");
  Kernel k = Kernel::zeros(radius);
  const double r2max = (radius + 0.5) * (radius + 0.5);
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      double rr = static_cast<double>(dx * dx + dy * dy);
      if (rr > r2max) continue;
      k.at(dx, dy) = psf_profile(kind, std::sqrt(rr), sigma, beta);
    }
  k.normalize();
  return k;
}

// K(r) proportional to (1 + r^2/sigma^2)^-beta, normalized to unit sum.
inline Kernel moffat_psf(double sigma, double beta, int radius) {
  return radial_psf(PsfKind::Moffat, sigma, beta, radius);
}

// K(r) proportional to exp(-r^beta / sigma^2), normalized to unit sum.
inline Kernel exponential_psf(double sigma, double beta, int radius) {
  return radial_psf(PsfKind::Exponential, sigma, beta, radius);
}

// ---------------------------------------------------------------------------
// Glare

struct GlareParams {
  PsfKind kind = PsfKind::Moffat;
  double sigma = 100.0;
  double beta = 2.0;
  double alpha = 1.0;
  int source_count = 1;
  Range source_size{2.0, 12.0};    // disk radius or rectangle half-extent, pixels
  Range source_color{1.0, 10.0};   // per-channel linear radiance

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("GlareParams: sigma must be positive");
    if (!(beta > 0.0)) throw std::invalid_argument("GlareParams: beta must be positive");
    if (!(alpha >= 0.0)) throw std::invalid_argument("GlareParams: alpha must be non-negative");
    if (source_count < 0) throw std::invalid_argument("GlareParams: negative source count");
    source_size.validate("source size");
    source_color.validate("source color");
  }
};

// Random filled disks and axis-aligned rectangles, rasterized at pixel centers
// and summed where they overlap.
inline LinearImage render_light_sources(int width, int height, const GlareParams& p, Rng& rng) {
  p.validate();
  LinearImage img(width, height, 3);
  for (int s = 0; s < p.source_count; ++s) {
    bool disk = std::uniform_int_distribution<int>(0, 1)(rng) == 0;
    double cx = std::uniform_real_distribution<double>(0.0, width)(rng);
    double cy = std::uniform_real_distribution<double>(0.0, height)(rng);
    double sx = p.source_size.sample(rng);
    double sy = disk ? sx : p.source_size.sample(rng);
    Rgb color(p.source_color.sample(rng), p.source_color.sample(rng), p.source_color.sample(rng));
    int x0 = std::max(0, static_cast<int>(std::floor(cx - sx - 1)));
    int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + sx + 1)));
    int y0 = std::max(0, static_cast<int>(std::floor(cy - sy - 1)));
    int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + sy + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = x + 0.5 - cx;
        double dy = y + 0.5 - cy;
        bool inside = disk ? dx * dx + dy * dy <= sx * sx : std::abs(dx) <= sx && std::abs(dy) <= sy;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) img.at(x, y, c) += static_cast<float>(color[c]);
      }
  }
  return img;
}

inline int image_diagonal(int width, int height) {
  return static_cast<int>(std::ceil(std::hypot(static_cast<double>(width), static_cast<double>(height))));
}

// G = L convolved with K.
inline LinearImage glare_field(const LinearImage& sources, const Kernel& psf,
                               ConvolutionMethod method = ConvolutionMethod::Auto) {
  if (psf.radius > image_diagonal(sources.width(), sources.height()))
    throw std::invalid_argument("glare_field: kernel larger than image");
  if (std::abs(psf.sum() - 1.0) > 1e-6) throw std::invalid_argument("glare_field: kernel not normalized");
  LinearImage g = convolve(sources, psf, method);
  for (float& v : g.data()) v = std::max(v, 0.0f);
  return g;
}

// ---------------------------------------------------------------------------
// Sensor noise: heteroscedastic read + shot model, optionally spatially
// correlated. Stands in for a learned noise sampler.

struct NoiseParams {
  double read_std = 0.0;
  double shot_gain = 0.0;
  double correlation_radius = 0.0;

  void validate() const {
    if (!(read_std >= 0.0 && shot_gain >= 0.0 && correlation_radius >= 0.0))
      throw std::invalid_argument("NoiseParams: all parameters must be non-negative");
  }
};

// Zero-mean field with per-pixel std = read_std + shot_gain * sqrt(signal).
inline LinearImage sensor_noise(int width, int height, int channels, const NoiseParams& p,
                                const LinearImage& signal, Rng& rng) {
  p.validate();
  if (!signal.same_size(width, height) || signal.channels() != channels)
    throw std::invalid_argument("sensor_noise: signal shape differs from requested shape");
  LinearImage field(width, height, channels);
  if (p.read_std == 0.0 && p.shot_gain == 0.0) return field;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (float& v : field.data()) v = static_cast<float>(normal(rng));
  if (p.correlation_radius > 0.0) {
    Kernel k = gaussian_kernel(p.correlation_radius);
    double energy = 0.0;
    for (double w : k.weights) energy += w * w;
    field = convolve(field, k);
    const float renorm = static_cast<float>(1.0 / std::sqrt(energy));
    for (float& v : field.data()) v *= renorm;
  }
  auto f = field.data();
  auto s = signal.data();
  for (std::size_t i = 0; i < f.size(); ++i)
    f[i] = static_cast<float>(f[i] * (p.read_std + p.shot_gain * std::sqrt(std::max(0.0f, s[i]))));
  return field;
}

// One noise draw, computed from `input`'s signal and added to both images.
inline std::pair<LinearImage, LinearImage> apply_paired_noise(const LinearImage& input, const LinearImage& target,
                                                              const NoiseParams& p, std::uint64_t seed) {
  require_same_shape(input, target, "apply_paired_noise");
  Rng rng(seed);
  LinearImage n = sensor_noise(input.width(), input.height(), input.channels(), p, input, rng);
  return {added(input, n), added(target, n)};
}

// ---------------------------------------------------------------------------
// Motion blur

struct MotionBlurParams {
  int length = 1;
  double angle = 0.0;
};

// Area coverage of a length x 1 pixel rectangle centered on the kernel and
// oriented at `angle`, estimated with 8x8 subsamples per tap.
inline Kernel motion_blur_kernel(int length, double angle) {
  if (length < 1) throw std::invalid_argument("motion_blur_kernel: length must be >= 1");
  double theta = std::fmod(angle, kPi);
  if (theta < 0.0) theta += kPi;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double half = 0.5 * length;
  const int r = static_cast<int>(std::ceil(half + 0.5));
  constexpr int kSub = 8;
  Kernel k = Kernel::zeros(r);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      int hits = 0;
      for (int j = 0; j < kSub; ++j)
        for (int i = 0; i < kSub; ++i) {
          double px = dx + (i + 0.5) / kSub - 0.5;
          double py = dy + (j + 0.5) / kSub - 0.5;
          double along = px * c + py * s;
          double across = -px * s + py * c;
          if (std::abs(along) <= half && std::abs(across) <= 0.5) ++hits;
        }
      k.at(dx, dy) = hits;
    }
  k.normalize();
  k.trim();
  return k;
}

// ---------------------------------------------------------------------------
// Configuration and applied-parameter record

struct DegradeConfig {
  double p_glare = 0.5;
  double p_noise = 0.5;
  double p_blur = 0.5;
  double p_photometric = 0.5;
  double p_tint = 0.5;

  std::string psf = "random";  // moffat | exponential | random
  Range sigma{50.0, 200.0};
  Range beta{1.0, 3.0};
  Range alpha{1.0, 3.0};
  Range source_count{1.0, 3.0};
  Range source_size{2.0, 12.0};
  Range source_color{1.0, 10.0};

  Range read_std{0.0, 0.02};
  Range shot_gain{0.0, 0.05};
  Range noise_correlation{0.0, 1.0};

  Range blur_length{15.0, 25.0};
  Range blur_angle{0.0, kTwoPi};

  Range brightness{0.7, 1.3};
  Range contrast{0.7, 1.3};
  Range tint{0.85, 1.15};

  double gamma = kDefaultGamma;
  std::uint64_t seed = 0;

  void validate() const {
    for (double p : {p_glare, p_noise, p_blur, p_photometric, p_tint})
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("DegradeConfig: probability outside [0,1]");
    if (psf != "random" && psf != "moffat" && psf != "exponential")
      throw std::invalid_argument("DegradeConfig: psf must be moffat, exponential or random");
    sigma.validate("sigma");
    beta.validate("beta");
    alpha.validate("alpha");
    source_count.validate("source_count");
    source_size.validate("source_size");
    source_color.validate("source_color");
    read_std.validate("read_std");
    shot_gain.validate("shot_gain");
    noise_correlation.validate("noise_correlation");
    blur_length.validate("blur_length");
    blur_angle.validate("blur_angle");
    brightness.validate("brightness");
    contrast.validate("contrast");
    tint.validate("tint");
    if (!(sigma.lo > 0.0)) throw std::invalid_argument("DegradeConfig: sigma must be positive");
    if (!(blur_length.lo >= 1.0)) throw std::invalid_argument("DegradeConfig: blur length must be >= 1");
    if (!(brightness.lo > 0.0)) throw std::invalid_argument("DegradeConfig: brightness gain must be positive");
    if (!(gamma > 0.0)) throw std::invalid_argument("DegradeConfig: gamma must be positive");
  }

  // Every stage on with probability 1.
  static DegradeConfig all_on() {
    DegradeConfig c;
    c.p_glare = c.p_noise = c.p_blur = c.p_photometric = c.p_tint = 1.0;
    return c;
  }
  static DegradeConfig all_off() {
    DegradeConfig c;
    c.p_glare = c.p_noise = c.p_blur = c.p_photometric = c.p_tint = 0.0;
    return c;
  }
};

namespace detail {
inline void range_to_json(nlohmann::json& j, const char* key, const Range& r) { j[key] = {r.lo, r.hi}; }
inline void range_from_json(const nlohmann::json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw std::invalid_argument(std::string("DegradeConfig: ") + key + " must be [lo, hi]");
  r = {v[0], v[1]};
}
}  // namespace detail

inline nlohmann::json to_json(const DegradeConfig& c) {
  nlohmann::json j;
  j["p_glare"] = c.p_glare;
  j["p_noise"] = c.p_noise;
  j["p_blur"] = c.p_blur;
  j["p_photometric"] = c.p_photometric;
  j["p_tint"] = c.p_tint;
  j["psf"] = c.psf;
  detail::range_to_json(j, "sigma", c.sigma);
  detail::range_to_json(j, "beta", c.beta);
  detail::range_to_json(j, "alpha", c.alpha);
  detail::range_to_json(j, "source_count", c.source_count);
  detail::range_to_json(j, "source_size", c.source_size);
  detail::range_to_json(j, "source_color", c.source_color);
  detail::range_to_json(j, "read_std", c.read_std);
  detail::range_to_json(j, "shot_gain", c.shot_gain);
  detail::range_to_json(j, "noise_correlation", c.noise_correlation);
  detail::range_to_json(j, "blur_length", c.blur_length);
  detail::range_to_json(j, "blur_angle", c.blur_angle);
  detail::range_to_json(j, "brightness", c.brightness);
  detail::range_to_json(j, "contrast", c.contrast);
  detail::range_to_json(j, "tint", c.tint);
  j["gamma"] = c.gamma;
  j["seed"] = c.seed;
  return j;
}

// Missing keys keep their defaults.
inline DegradeConfig degrade_config_from_json(const nlohmann::json& j) {
  DegradeConfig c;
  c.p_glare = j.value("p_glare", c.p_glare);
  c.p_noise = j.value("p_noise", c.p_noise);
  c.p_blur = j.value("p_blur", c.p_blur);
  c.p_photometric = j.value("p_photometric", c.p_photometric);
  c.p_tint = j.value("p_tint", c.p_tint);
  if (j.contains("p")) {
    double p = j.at("p").get<double>();
    c.p_glare = c.p_noise = c.p_blur = c.p_photometric = c.p_tint = p;
  }
  c.psf = j.value("psf", c.psf);
  detail::range_from_json(j, "sigma", c.sigma);
  detail::range_from_json(j, "beta", c.beta);
  detail::range_from_json(j, "alpha", c.alpha);
  detail::range_from_json(j, "source_count", c.source_count);
  detail::range_from_json(j, "source_size", c.source_size);
  detail::range_from_json(j, "source_color", c.source_color);
  detail::range_from_json(j, "read_std", c.read_std);
  detail::range_from_json(j, "shot_gain", c.shot_gain);
  detail::range_from_json(j, "noise_correlation", c.noise_correlation);
  detail::range_from_json(j, "blur_length", c.blur_length);
  detail::range_from_json(j, "blur_angle", c.blur_angle);
  detail::range_from_json(j, "brightness", c.brightness);
  detail::range_from_json(j, "contrast", c.contrast);
  detail::range_from_json(j, "tint", c.tint);
  c.gamma = j.value("gamma", c.gamma);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

struct GlareRecord {
  GlareParams params;
  std::uint64_t source_seed = 0;
  int psf_radius = 0;
};

struct NoiseRecord {
  NoiseParams params;
  std::uint64_t seed = 0;
};

struct PhotometricRecord {
  double gain = 1.0;
  double contrast = 1.0;
};

// Stages that were applied, with the parameters sampled for them.
struct DegradeRecord {
  std::optional<GlareRecord> glare;
  std::optional<NoiseRecord> noise;
  std::optional<MotionBlurParams> blur;
  std::optional<PhotometricRecord> photometric;
  std::optional<Rgb> tint;
  double gamma = kDefaultGamma;
};

inline nlohmann::json to_json(const DegradeRecord& r) {
  nlohmann::json j;
  nlohmann::json stages = nlohmann::json::array();
  if (r.glare) {
    const auto& g = *r.glare;
    stages.push_back("glare");
    j["glare"] = {{"psf", to_string(g.params.kind)},
                  {"sigma", g.params.sigma},
                  {"beta", g.params.beta},
                  {"alpha", g.params.alpha},
                  {"source_count", g.params.source_count},
                  {"source_size", {g.params.source_size.lo, g.params.source_size.hi}},
                  {"source_color", {g.params.source_color.lo, g.params.source_color.hi}},
                  {"source_seed", g.source_seed},
                  {"psf_radius", g.psf_radius}};
  }
  if (r.noise) {
    stages.push_back("noise");
    j["noise"] = {{"read_std", r.noise->params.read_std},
                  {"shot_gain", r.noise->params.shot_gain},
                  {"correlation_radius", r.noise->params.correlation_radius},
                  {"seed", r.noise->seed}};
  }
  if (r.blur) {
    stages.push_back("blur");
    j["blur"] = {{"length", r.blur->length}, {"angle", r.blur->angle}};
  }
  if (r.photometric) {
    stages.push_back("photometric");
    j["photometric"] = {{"gain", r.photometric->gain}, {"contrast", r.photometric->contrast}};
  }
  if (r.tint) {
    stages.push_back("tint");
    j["tint"] = {(*r.tint)[0], (*r.tint)[1], (*r.tint)[2]};
  }
  j["stages"] = stages;
  j["gamma"] = r.gamma;
  return j;
}

inline bool gate(double p, Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

// Draws the stage gates and parameters in a fixed order: glare, noise, blur.
inline DegradeRecord sample_degradation(const DegradeConfig& cfg, int width, int height, Rng& rng) {
  cfg.validate();
  DegradeRecord rec;
  rec.gamma = cfg.gamma;
  if (gate(cfg.p_glare, rng)) {
    GlareRecord g;
    if (cfg.psf == "random")
      g.params.kind = gate(0.5, rng) ? PsfKind::Moffat : PsfKind::Exponential;
    else
      g.params.kind = psf_kind_from_string(cfg.psf);
    g.params.sigma = cfg.sigma.sample(rng);
    g.params.beta = cfg.beta.sample(rng);
    g.params.alpha = cfg.alpha.sample(rng);
    g.params.source_count = cfg.source_count.sample_int(rng);
    g.params.source_size = cfg.source_size;
    g.params.source_color = cfg.source_color;
    g.source_seed = rng();
    g.psf_radius = psf_support_radius(g.params.kind, g.params.sigma, g.params.beta, image_diagonal(width, height));
    rec.glare = g;
  }
  if (gate(cfg.p_noise, rng)) {
    NoiseRecord n;
    n.params.read_std = cfg.read_std.sample(rng);
    n.params.shot_gain = cfg.shot_gain.sample(rng);
    n.params.correlation_radius = cfg.noise_correlation.sample(rng);
    n.seed = rng();
    rec.noise = n;
  }
  if (gate(cfg.p_blur, rng)) {
    MotionBlurParams b;
    b.length = cfg.blur_length.sample_int(rng);
    b.angle = cfg.blur_angle.sample(rng);
    rec.blur = b;
  }
  return rec;
}

// Raw-domain forward model (I + alpha G + N) * B for an already sampled
// record, clamped at zero. No gamma.
inline LinearImage apply_degradation_raw(const LinearImage& raw, const DegradeRecord& rec) {
  LinearImage img = raw;
  if (rec.glare) {
    Rng src_rng(rec.glare->source_seed);
    LinearImage sources = render_light_sources(raw.width(), raw.height(), rec.glare->params, src_rng);
    if (raw.channels() == 1) {
      LinearImage grey(raw.width(), raw.height(), 1);
      for (int y = 0; y < raw.height(); ++y)
        for (int x = 0; x < raw.width(); ++x)
          grey.at(x, y) = (sources.at(x, y, 0) + sources.at(x, y, 1) + sources.at(x, y, 2)) / 3.0f;
      sources = std::move(grey);
    }
    Kernel psf = radial_psf(rec.glare->params.kind, rec.glare->params.sigma, rec.glare->params.beta,
                            rec.glare->psf_radius);
    LinearImage g = glare_field(sources, psf);
    const float alpha = static_cast<float>(rec.glare->params.alpha);
    auto d = img.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * gd[i];
  }
  if (rec.noise) {
    Rng noise_rng(rec.noise->seed);
    LinearImage n = sensor_noise(img.width(), img.height(), img.channels(), rec.noise->params, img, noise_rng);
    auto d = img.data();
    auto nd = n.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += nd[i];
  }
  if (rec.blur) img = convolve(img, motion_blur_kernel(rec.blur->length, rec.blur->angle));
  for (float& v : img.data()) v = std::max(v, 0.0f);
  return img;
}

struct DegradeResult {
  LinearImage display;
  DegradeRecord record;
};

// Composite forward model: add alpha*G, add N, convolve B, clamp at 0, gamma
// encode. Each stage is gated independently.
inline DegradeResult composite_degrade(const LinearImage& raw, const DegradeConfig& cfg, Rng& rng) {
  if (!raw.is_valid_radiance()) throw std::invalid_argument("composite_degrade: input must be finite and non-negative");
  DegradeRecord rec = sample_degradation(cfg, raw.width(), raw.height(), rng);
  LinearImage degraded = apply_degradation_raw(raw, rec);
  return {gamma_encode(degraded, cfg.gamma), rec};
}

// ---------------------------------------------------------------------------
// Photometric transforms

inline double masked_mean(const LinearImage& img, const Mask* mask) {
  if (mask) require_mask(*mask, img, "masked_mean");
  double sum = 0.0, weight = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      double m = mask ? mask->at(x, y) : 1.0;
      if (m <= 0.0) continue;
      for (int c = 0; c < img.channels(); ++c) sum += m * img.at(x, y, c);
      weight += m * img.channels();
    }
  return weight > 0.0 ? sum / weight : 0.0;
}

// out = g * (c * (img - m) + m), m the (masked) mean over all channels.
inline LinearImage photometric_transform(const LinearImage& img, double gain, double contrast,
                                         const Mask* mask = nullptr) {
  if (!(gain > 0.0)) throw std::invalid_argument("photometric_transform: gain must be positive");
  const double m = masked_mean(img, mask);
  LinearImage out = img;
  for (float& v : out.data()) v = static_cast<float>(gain * (contrast * (v - m) + m));
  return out;
}

inline LinearImage photometric_inverse(const LinearImage& img, double gain, double contrast,
                                       const Mask* mask = nullptr) {
  if (!(gain > 0.0)) throw std::invalid_argument("photometric_inverse: gain must be positive");
  if (contrast == 0.0) throw std::invalid_argument("photometric_inverse: contrast 0 is not invertible");
  const double m = masked_mean(img, mask) / gain;
  LinearImage out = img;
  for (float& v : out.data()) v = static_cast<float>((v / gain - m) / contrast + m);
  return out;
}

// ---------------------------------------------------------------------------
// Spatial augmentation

struct SpatialRanges {
  Range scale{1.0, 1.0};
  Range rotation_deg{0.0, 0.0};
  int crop_width = 0;  // 0 keeps the full size
  int crop_height = 0;
};

struct SpatialTransform {
  double scale = 1.0;
  double rotation_deg = 0.0;  // counter-clockwise as displayed
  int crop_x = 0;
  int crop_y = 0;
  int crop_width = 0;
  int crop_height = 0;
};

struct AlignedSet {
  LinearImage input;
  std::optional<NormalMap> normals;
  std::optional<LinearImage> albedo;
  std::optional<Mask> mask;
};

inline SpatialTransform sample_spatial(const SpatialRanges& r, int width, int height, Rng& rng) {
  r.scale.validate("scale");
  r.rotation_deg.validate("rotation");
  if (!(r.scale.lo > 0.0)) throw std::invalid_argument("spatial_augment: scale must be positive");
  SpatialTransform t;
  t.crop_width = r.crop_width > 0 ? r.crop_width : width;
  t.crop_height = r.crop_height > 0 ? r.crop_height : height;
  if (t.crop_width > width || t.crop_height > height)
    throw std::invalid_argument("spatial_augment: crop larger than image");
  t.scale = r.scale.sample(rng);
  t.rotation_deg = r.rotation_deg.sample(rng);
  t.crop_x = std::uniform_int_distribution<int>(0, width - t.crop_width)(rng);
  t.crop_y = std::uniform_int_distribution<int>(0, height - t.crop_height)(rng);
  return t;
}

namespace detail {

// Exact values at quarter turns so 90-degree rotations are pure permutations.
inline std::pair<double, double> cos_sin_deg(double deg) {
  double q = deg / 90.0;
  if (q == std::round(q)) {
    int k = static_cast<int>(std::fmod(std::round(q), 4.0));
    if (k < 0) k += 4;
    static constexpr double kc[4] = {1, 0, -1, 0};
    static constexpr double ks[4] = {0, 1, 0, -1};
    return {kc[k], ks[k]};
  }
  double rad = deg * kPi / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

inline bool is_identity(const SpatialTransform& t, int w, int h) {
  return t.scale == 1.0 && std::fmod(t.rotation_deg, 360.0) == 0.0 && t.crop_x == 0 && t.crop_y == 0 &&
         t.crop_width == w && t.crop_height == h;
}

// Bilinear, zero outside the source.
inline float sample_zero(const LinearImage& img, double fx, double fy, int c) {
  double x0f = std::floor(fx), y0f = std::floor(fy);
  double tx = fx - x0f, ty = fy - y0f;
  int x0 = static_cast<int>(x0f), y0 = static_cast<int>(y0f);
  auto px = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return 0.0;
    return img.at(x, y, c);
  };
  double a = tx == 0.0 ? px(x0, y0) : (1 - tx) * px(x0, y0) + tx * px(x0 + 1, y0);
  if (ty == 0.0) return static_cast<float>(a);
  double b = tx == 0.0 ? px(x0, y0 + 1) : (1 - tx) * px(x0, y0 + 1) + tx * px(x0 + 1, y0 + 1);
  return static_cast<float>((1 - ty) * a + ty * b);
}

inline LinearImage warp(const LinearImage& img, const SpatialTransform& t) {
  auto [c, s] = cos_sin_deg(t.rotation_deg);
  const double cx = 0.5 * (img.width() - 1);
  const double cy = 0.5 * (img.height() - 1);
  LinearImage out(t.crop_width, t.crop_height, img.channels());
  for (int y = 0; y < t.crop_height; ++y)
    for (int x = 0; x < t.crop_width; ++x) {
      double a = (x + t.crop_x - cx) / t.scale;
      double b = (y + t.crop_y - cy) / t.scale;
      // Inverse of the displayed counter-clockwise rotation in y-down pixel space.
      double sx = cx + a * c - b * s;
      double sy = cy + a * s + b * c;
      for (int ch = 0; ch < img.channels(); ++ch) out.at(x, y, ch) = sample_zero(img, sx, sy, ch);
    }
  return out;
}

}  // namespace detail

// One sampled transform applied to every member. Normal vectors are rotated
// in-plane by the same angle; the mask is re-clamped to [0,1].
inline AlignedSet apply_spatial(const AlignedSet& set, const SpatialTransform& t) {
  const int w = set.input.width();
  const int h = set.input.height();
  if (detail::is_identity(t, w, h)) return set;
  AlignedSet out;
  out.input = detail::warp(set.input, t);
  if (set.albedo) out.albedo = detail::warp(*set.albedo, t);
  if (set.mask) {
    LinearImage m = detail::warp(set.mask->to_image(), t);
    for (float& v : m.data()) v = std::clamp(v, 0.0f, 1.0f);
    out.mask = Mask::from_image(m);
  }
  if (set.normals) {
    NormalMap nm(detail::warp(set.normals->encoded(), t));
    auto [c, s] = detail::cos_sin_deg(t.rotation_deg);
    for (int y = 0; y < nm.height(); ++y)
      for (int x = 0; x < nm.width(); ++x) {
        const LinearImage& e = nm.encoded();
        if (e.at(x, y, 0) == 0.0f && e.at(x, y, 1) == 0.0f && e.at(x, y, 2) == 0.0f) continue;
        Vec3 n = nm.normal(x, y);
        Vec3 rn(n.x() * c - n.y() * s, n.x() * s + n.y() * c, n.z());
        double len = rn.norm();
        if (len > 0.0) rn /= len;
        nm.set(x, y, rn);
      }
    out.normals = std::move(nm);
  }
  return out;
}

inline AlignedSet spatial_augment(const AlignedSet& set, Rng& rng, const SpatialRanges& ranges) {
  const int w = set.input.width();
  const int h = set.input.height();
  auto same = [&](const LinearImage& img) { return img.same_size(w, h); };
  if ((set.normals && !same(set.normals->encoded())) || (set.albedo && !same(*set.albedo)) ||
      (set.mask && !set.mask->matches(set.input)))
    throw std::invalid_argument("spatial_augment: members have different dimensions");
  return apply_spatial(set, sample_spatial(ranges, w, h, rng));
}

// ---------------------------------------------------------------------------
// Asymmetric teacher/student pairs

struct DegradeSample {
  LinearImage image;
  std::optional<Mask> mask;
};

struct AsymmetricPair {
  LinearImage teacher;  // the untouched input
  LinearImage student;  // display domain
  DegradeRecord record;
};

inline LinearImage apply_tint(const LinearImage& img, const Rgb& tint) {
  LinearImage out = img;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(x, y, c) = static_cast<float>(img.at(x, y, c) * tint[img.channels() == 3 ? c : 0]);
  return out;
}

// Student-side post-processing after the composite model; display domain.
inline LinearImage apply_student_photometrics(const LinearImage& display, const DegradeRecord& rec, const Mask* mask) {
  LinearImage out = display;
  if (rec.photometric) out = photometric_transform(out, rec.photometric->gain, rec.photometric->contrast, mask);
  if (rec.tint) out = apply_tint(out, *rec.tint);
  if (rec.photometric || rec.tint)
    for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

// The teacher copy is the input unchanged; only the student copy is degraded:
// composite_degrade, then the photometric transform and ambient tint, each gated.
inline AsymmetricPair asymmetric_pair(const DegradeSample& sample, const DegradeConfig& cfg, Rng& rng) {
  const Mask* mask = sample.mask ? &*sample.mask : nullptr;
  if (mask) require_mask(*mask, sample.image, "asymmetric_pair");
  DegradeResult deg = composite_degrade(sample.image, cfg, rng);
  DegradeRecord rec = deg.record;
  if (gate(cfg.p_photometric, rng)) {
    PhotometricRecord p;
    p.gain = cfg.brightness.sample(rng);
    p.contrast = cfg.contrast.sample(rng);
    rec.photometric = p;
  }
  if (gate(cfg.p_tint, rng)) {
    Rgb t;
    for (int c = 0; c < 3; ++c) t[c] = cfg.tint.sample(rng);
    rec.tint = t;
  }
  return {sample.image, apply_student_photometrics(deg.display, rec, mask), rec};
}

}  // namespace relit
