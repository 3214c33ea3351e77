#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "relit/image.hpp"

namespace relit {

// Square (2r+1)x(2r+1) filter, row-major, center at (r, r).
struct Kernel {
  int radius = 0;
  std::vector<double> weights{1.0};

  int size() const { return 2 * radius + 1; }
  double at(int dx, int dy) const {
    return weights[static_cast<std::size_t>(dy + radius) * size() + (dx + radius)];
  }
  double& at(int dx, int dy) { return weights[static_cast<std::size_t>(dy + radius) * size() + (dx + radius)]; }
  double sum() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  static Kernel zeros(int radius) {
    Kernel k;
    k.radius = radius;
    k.weights.assign(static_cast<std::size_t>(2 * radius + 1) * (2 * radius + 1), 0.0);
    return k;
  }

  void normalize() {
    double s = sum();
    if (!(s > 0.0)) throw std::invalid_argument("Kernel: cannot normalize a kernel with non-positive sum");
    for (double& w : weights) w /= s;
  }

  // Drops all-zero outer rings.
  void trim() {
    int r = radius;
    auto ring_zero = [&](int rr) {
      for (int d = -rr; d <= rr; ++d)
        if (at(d, -rr) != 0.0 || at(d, rr) != 0.0 || at(-rr, d) != 0.0 || at(rr, d) != 0.0) return false;
      return true;
    };
    while (r > 0 && ring_zero(r)) --r;
    if (r == radius) return;
    Kernel t = zeros(r);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) t.at(dx, dy) = at(dx, dy);
    *this = std::move(t);
  }
};

// Half-sample symmetric extension (... b a | a b c d | d c ...), valid for any offset.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

inline constexpr int kDirectConvolutionMaxSupport = 31;

enum class ConvolutionMethod { Auto, Direct, Fourier };

// out(x) = sum_d K(d) in(x - d) with reflect padding. Accumulates in double
// over kernel rows then columns.
inline LinearImage convolve_direct(const LinearImage& img, const Kernel& k) {
  LinearImage out(img.width(), img.height(), img.channels());
  const int r = k.radius;
  const int w = img.width();
  const int h = img.height();
  const int ch = img.channels();
  std::vector<int> xs(static_cast<std::size_t>(w) * (2 * r + 1));
  for (int x = 0; x < w; ++x)
    for (int dx = -r; dx <= r; ++dx) xs[static_cast<std::size_t>(x) * (2 * r + 1) + (dx + r)] = reflect_index(x - dx, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          int sy = reflect_index(y - dy, h);
          for (int dx = -r; dx <= r; ++dx) {
            double kw = k.at(dx, dy);
            if (kw == 0.0) continue;
            acc += kw * img.at(xs[static_cast<std::size_t>(x) * (2 * r + 1) + (dx + r)], sy, c);
          }
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
  return out;
}

namespace detail {
// FFTW's planner is not thread-safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Same result as convolve_direct, via a circular transform of the
// reflect-padded image (size W+2r by H+2r, which needs no extra zero padding).
inline LinearImage convolve_fft(const LinearImage& img, const Kernel& k) {
  const int r = k.radius;
  const int w = img.width();
  const int h = img.height();
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  const int cw = pw / 2 + 1;
  const std::size_t real_n = static_cast<std::size_t>(pw) * ph;
  const std::size_t cplx_n = static_cast<std::size_t>(ph) * cw;

  double* spatial = fftw_alloc_real(real_n);
  fftw_complex* kspec = fftw_alloc_complex(cplx_n);
  fftw_complex* ispec = fftw_alloc_complex(cplx_n);
  fftw_plan fwd, inv;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_2d(ph, pw, spatial, ispec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(ph, pw, ispec, spatial, FFTW_ESTIMATE);
  }

  std::fill(spatial, spatial + real_n, 0.0);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      int px = (dx + pw) % pw;
      int py = (dy + ph) % ph;
      spatial[static_cast<std::size_t>(py) * pw + px] += k.at(dx, dy);
    }
  fftw_execute_dft_r2c(fwd, spatial, kspec);

  LinearImage out(w, h, img.channels());
  const double scale = 1.0 / static_cast<double>(real_n);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        spatial[static_cast<std::size_t>(y) * pw + x] = img.at(reflect_index(x - r, w), reflect_index(y - r, h), c);
    fftw_execute_dft_r2c(fwd, spatial, ispec);
    for (std::size_t i = 0; i < cplx_n; ++i) {
      double re = ispec[i][0] * kspec[i][0] - ispec[i][1] * kspec[i][1];
      double im = ispec[i][0] * kspec[i][1] + ispec[i][1] * kspec[i][0];
      ispec[i][0] = re;
      ispec[i][1] = im;
    }
    fftw_execute_dft_c2r(inv, ispec, spatial);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(x, y, c) = static_cast<float>(spatial[static_cast<std::size_t>(y + r) * pw + (x + r)] * scale);
  }

  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(spatial);
  fftw_free(kspec);
  fftw_free(ispec);
  return out;
}

inline LinearImage convolve(const LinearImage& img, const Kernel& k, ConvolutionMethod method = ConvolutionMethod::Auto) {
  if (img.empty()) return img;
  if (method == ConvolutionMethod::Auto)
    method = k.size() > kDirectConvolutionMaxSupport ? ConvolutionMethod::Fourier : ConvolutionMethod::Direct;
  return method == ConvolutionMethod::Direct ? convolve_direct(img, k) : convolve_fft(img, k);
}

inline Kernel gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  Kernel k = Kernel::zeros(r);
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) k.at(dx, dy) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  k.normalize();
  return k;
}

}  // namespace relit
