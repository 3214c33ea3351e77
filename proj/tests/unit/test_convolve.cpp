#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace relit;

namespace {

Kernel random_kernel(int radius, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Kernel k = Kernel::zeros(radius);
  for (double& w : k.weights) w = u(rng);
  k.normalize();
  return k;
}

LinearImage random_image(int w, int h, int c, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 2.0f);
  LinearImage img(w, h, c);
  for (float& v : img.data()) v = u(rng);
  return img;
}

}  // namespace

TEST(Reflect, HalfSampleSymmetric) {
  // ... b a | a b c d | d c ...
  EXPECT_EQ(reflect_index(-1, 4), 0);
  EXPECT_EQ(reflect_index(-2, 4), 1);
  EXPECT_EQ(reflect_index(4, 4), 3);
  EXPECT_EQ(reflect_index(5, 4), 2);
  EXPECT_EQ(reflect_index(8, 4), 0);
  EXPECT_EQ(reflect_index(-9, 4), 0);
  EXPECT_EQ(reflect_index(17, 1), 0);
}

TEST(Kernel, NormalizeAndTrim) {
  Kernel k = Kernel::zeros(3);
  k.at(0, 0) = 2.0;
  k.at(1, 0) = 2.0;
  k.normalize();
  EXPECT_DOUBLE_EQ(k.sum(), 1.0);
  k.trim();
  EXPECT_EQ(k.radius, 1);
  EXPECT_DOUBLE_EQ(k.at(1, 0), 0.5);
  EXPECT_THROW(Kernel::zeros(2).normalize(), std::invalid_argument);
}

TEST(Convolve, DeltaKernelIsIdentity) {
  LinearImage img = random_image(9, 7, 3, 1);
  Kernel delta = Kernel::zeros(2);
  delta.at(0, 0) = 1.0;
  EXPECT_EQ(convolve_direct(img, delta), img);
  EXPECT_LT(relit::testing::max_abs_diff(convolve_fft(img, delta), img), 1e-5);
}

TEST(Convolve, ShiftKernelMovesContent) {
  // out(x) = in(x - 1): a tap at dx = +1 shifts content right.
  LinearImage img(5, 1, 1);
  img.at(2, 0) = 1.0f;
  Kernel k = Kernel::zeros(1);
  k.at(1, 0) = 1.0;
  LinearImage out = convolve_direct(img, k);
  EXPECT_EQ(out.at(3, 0), 1.0f);
  EXPECT_EQ(out.at(2, 0), 0.0f);
}

TEST(Convolve, ReflectPaddingPreservesConstants) {
  LinearImage img(6, 5, 3, 0.75f);
  Kernel k = random_kernel(4, 3);
  LinearImage out = convolve_direct(img, k);
  for (float v : out.data()) EXPECT_NEAR(v, 0.75f, 1e-6);
}

TEST(Convolve, FourierMatchesDirect) {
  for (int r : {1, 6, 20}) {
    LinearImage img = random_image(23, 17, 3, 10 + r);
    Kernel k = random_kernel(r, 20 + r);
    LinearImage d = convolve(img, k, ConvolutionMethod::Direct);
    LinearImage f = convolve(img, k, ConvolutionMethod::Fourier);
    EXPECT_LT(relit::testing::max_abs_diff(d, f), 1e-5) << "radius " << r;
  }
}

TEST(Convolve, KernelLargerThanImageStillReflects) {
  LinearImage img = random_image(5, 4, 1, 7);
  Kernel k = random_kernel(9, 8);
  EXPECT_LT(relit::testing::max_abs_diff(convolve_direct(img, k), convolve_fft(img, k)), 1e-5);
}

TEST(Convolve, GaussianKernel) {
  Kernel g = gaussian_kernel(1.5);
  EXPECT_EQ(g.radius, 5);
  EXPECT_NEAR(g.sum(), 1.0, 1e-12);
  EXPECT_NEAR(g.at(1, 0) / g.at(0, 0), std::exp(-1.0 / (2 * 1.5 * 1.5)), 1e-12);
  EXPECT_THROW(gaussian_kernel(0.0), std::invalid_argument);
}
