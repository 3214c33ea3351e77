#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relit/image.hpp"

namespace relit {

// ---------------------------------------------------------------------------
// Foreground-masked image quality. Inputs are display-domain images in [0,1].

inline double mse_masked(const LinearImage& a, const LinearImage& b, const Mask& mask) {
  require_same_shape(a, b, "mse_masked");
  require_mask(mask, a, "mse_masked");
  double sum = 0.0, weight = 0.0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      double m = mask.at(x, y);
      if (m <= 0.0) continue;
      for (int c = 0; c < a.channels(); ++c) {
        double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        sum += m * d * d;
      }
      weight += m * a.channels();
    }
  if (!(weight > 0.0)) throw std::invalid_argument("mse_masked: empty mask");
  return sum / weight;
}

// +infinity when mse == 0.
inline double psnr(double mse, double peak = 1.0) {
  if (mse < 0.0 || std::isnan(mse)) throw std::invalid_argument("psnr: negative mse");
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

struct SsimOptions {
  int window_radius = 5;  // 11x11
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

// Gaussian-windowed SSIM averaged over windows whose center is covered. Window
// weights are multiplied by mask coverage, so pixels outside the mask never
// contribute.
inline double ssim_masked(const LinearImage& a, const LinearImage& b, const Mask& mask, const SsimOptions& o = {}) {
  require_same_shape(a, b, "ssim_masked");
  require_mask(mask, a, "ssim_masked");
  const int r = o.window_radius;
  std::vector<double> g(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      g[static_cast<std::size_t>(dy + r) * (2 * r + 1) + dx + r] = std::exp(-(dx * dx + dy * dy) / (2.0 * o.sigma * o.sigma));
  const double c1 = (o.k1 * o.peak) * (o.k1 * o.peak);
  const double c2 = (o.k2 * o.peak) * (o.k2 * o.peak);

  double total = 0.0;
  std::size_t windows = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!mask.covered(x, y)) continue;
      for (int c = 0; c < a.channels(); ++c) {
        double sw = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = -r; dy <= r; ++dy) {
          int yy = y + dy;
          if (yy < 0 || yy >= a.height()) continue;
          for (int dx = -r; dx <= r; ++dx) {
            int xx = x + dx;
            if (xx < 0 || xx >= a.width()) continue;
            double w = g[static_cast<std::size_t>(dy + r) * (2 * r + 1) + dx + r] * mask.at(xx, yy);
            if (w <= 0.0) continue;
            double va = a.at(xx, yy, c);
            double vb = b.at(xx, yy, c);
            sw += w;
            sa += w * va;
            sb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        double mu_a = sa / sw, mu_b = sb / sw;
        double var_a = saa / sw - mu_a * mu_a;
        double var_b = sbb / sw - mu_b * mu_b;
        double cov = sab / sw - mu_a * mu_b;
        double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        total += num / den;
        ++windows;
      }
    }
  if (windows == 0) throw std::invalid_argument("ssim_masked: empty mask");
  return total / static_cast<double>(windows);
}

struct MetricReport {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double pixel_count = 0.0;  // sum of mask coverage
};

inline MetricReport evaluate_metrics(const LinearImage& a, const LinearImage& b, const Mask& mask, double peak = 1.0) {
  MetricReport r;
  r.mse = mse_masked(a, b, mask);
  r.psnr = psnr(r.mse, peak);
  SsimOptions o;
  o.peak = peak;
  r.ssim = ssim_masked(a, b, mask, o);
  r.pixel_count = mask.coverage_sum();
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["mse"] = r.mse;
  if (std::isinf(r.psnr))
    j["psnr"] = "inf";
  else
    j["psnr"] = r.psnr;
  j["ssim"] = r.ssim;
  j["pixel_count"] = r.pixel_count;
  return j;
}

// ---------------------------------------------------------------------------
// Latency harness

struct BenchReport {
  std::string op;
  std::string resolution;
  std::string device = "cpu";
  int iterations = 0;
  int warmup = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double throughput_fps = 0.0;
  std::vector<double> samples_ms;
};

inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double pos = q * (v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

// Times `op` on a monotonic clock after discarding `warmup` runs. Exceptions
// from the thunk propagate.
inline BenchReport bench(const std::function<void()>& op, const std::string& name, const std::string& resolution,
                         int iterations, int warmup = 0) {
  if (iterations < 1) throw std::invalid_argument("bench: iterations must be >= 1");
  if (warmup < 0) throw std::invalid_argument("bench: warmup must be >= 0");
  for (int i = 0; i < warmup; ++i) op();
  BenchReport r;
  r.op = name;
  r.resolution = resolution;
  r.iterations = iterations;
  r.warmup = warmup;
  r.samples_ms.reserve(iterations);
  for (int i = 0; i < iterations; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    op();
    auto t1 = std::chrono::steady_clock::now();
    r.samples_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  r.mean_ms = std::accumulate(r.samples_ms.begin(), r.samples_ms.end(), 0.0) / iterations;
  r.median_ms = percentile(r.samples_ms, 0.5);
  r.p95_ms = percentile(r.samples_ms, 0.95);
  r.throughput_fps = r.mean_ms > 0.0 ? 1000.0 / r.mean_ms : std::numeric_limits<double>::infinity();
  return r;
}

inline nlohmann::json to_json(const BenchReport& r) {
  return {{"op", r.op},
          {"resolution", r.resolution},
          {"device", r.device},
          {"iterations", r.iterations},
          {"warmup", r.warmup},
          {"mean_ms", r.mean_ms},
          {"median_ms", r.median_ms},
          {"p95_ms", r.p95_ms},
          {"throughput_fps", r.throughput_fps}};
}

// Aligned text table: Method | Device | Resolution | latencies | FPS.
inline std::string format_bench_table(const std::vector<BenchReport>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-22s %-8s %-12s %12s %12s %10s %10s\n", "Method", "Device", "Resolution",
                "Latency(ms)", "Median(ms)", "p95(ms)", "FPS");
  out += line;
  out += std::string(92, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-22s %-8s %-12s %12.3f %12.3f %10.3f %10.1f\n", r.op.c_str(), r.device.c_str(),
                  r.resolution.c_str(), r.mean_ms, r.median_ms, r.p95_ms, r.throughput_fps);
    out += line;
  }
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("fit_line: need >= 2 paired samples");
  const double n = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r_squared = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

}  // namespace relit
