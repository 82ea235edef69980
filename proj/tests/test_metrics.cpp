#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "vfi/metrics.hpp"

using namespace vfi;

namespace {

Frame offset(const Frame& f, double d) {
  Frame g = f;
  for (double& v : g.data()) v += d;
  return g;
}

}  // namespace

TEST_CASE("psnr examples") {
  testing::Rng rng(21);
  Frame a = testing::random_frame(rng, 16, 12);
  for (double& v : a.data()) v = 0.1 + 0.8 * v;
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(std::abs(psnr(a, offset(a, 0.1)) - 20.0) < 1e-9);
  CHECK(std::abs(psnr(a, offset(a, 0.01)) - 40.0) < 1e-9);
  CHECK_THROWS_AS(psnr(a, Frame(16, 12, 1)), std::invalid_argument);
}

TEST_CASE("psnr uses the joint mse") {
  Frame a(4, 4, 3, 0.5);
  Frame b = a;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) b.at(x, y, 0) += 0.3;
  }
  // MSE = 0.09 / 3
  CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(3.0 / 0.09)));
}

TEST_CASE("psnr decreases with the offset and is symmetric") {
  Frame a(12, 12, 3, 0.4);
  double last = std::numeric_limits<double>::infinity();
  for (double d : {0.01, 0.02, 0.05, 0.1, 0.3}) {
    const double p = psnr(a, offset(a, d));
    CHECK(p < last);
    last = p;
  }
  testing::Rng rng(22);
  const Frame x = testing::random_frame(rng, 20, 15);
  const Frame y = testing::random_frame(rng, 20, 15);
  CHECK(psnr(x, y) == psnr(y, x));
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-14));
}

TEST_CASE("ssim examples") {
  testing::Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const Frame a = testing::random_frame(rng, 11 + trial * 3, 14, trial % 2 ? 1 : 3);
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
  }
  const double c1 = 1e-4;
  const double closed = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
  CHECK(std::abs(ssim(Frame(16, 16, 3, 0.5), Frame(16, 16, 3, 0.6)) - closed) < 1e-9);

  Frame board(16, 16, 1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) board.at(x, y, 0) = (x + y) % 2;
  }
  Frame inverse = board;
  for (double& v : inverse.data()) v = 1.0 - v;
  CHECK(ssim(board, inverse) < 0.0);

  CHECK_THROWS_AS(ssim(Frame(10, 30, 1), Frame(10, 30, 1)), std::invalid_argument);
}

TEST_CASE("ssim stays in range") {
  testing::Rng rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    const Frame a = testing::random_frame(rng, 13, 13);
    const Frame b = testing::random_frame(rng, 13, 13);
    const double s = ssim(a, b);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("l1 examples") {
  Frame a(6, 4, 3, 0.3);
  CHECK(l1_loss(a, a) == 0.0);
  CHECK(l1_loss(a, offset(a, 0.25)) == doctest::Approx(0.25).epsilon(1e-14));
  Frame half = a;
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 6; ++x) {
      for (int c = 0; c < 3; ++c) half.at(x, y, c) += 0.2;
    }
  }
  CHECK(l1_loss(a, half) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("l1 triangle inequality and gradient") {
  testing::Rng rng(25);
  for (int trial = 0; trial < 50; ++trial) {
    const Frame a = testing::random_frame(rng, 5, 5);
    const Frame b = testing::random_frame(rng, 5, 5);
    const Frame c = testing::random_frame(rng, 5, 5);
    CHECK(l1_loss(a, c) <= l1_loss(a, b) + l1_loss(b, c) + 1e-15);
  }
  const Frame a = testing::random_frame(rng, 3, 2);
  Frame b = a;
  b.at(0, 0, 0) += 0.5;
  b.at(1, 0, 0) -= 0.5;
  const Frame g = l1_loss_gradient(a, b);
  const double n = static_cast<double>(a.size());
  CHECK(g.at(0, 0, 0) == doctest::Approx(-1.0 / n));
  CHECK(g.at(1, 0, 0) == doctest::Approx(1.0 / n));
  CHECK(g.at(2, 0, 0) == 0.0);

  const Frame big = testing::random_frame(rng, 12, 12);
  const MetricReport r = measure(big, big);
  CHECK(r.l1 == 0.0);
  CHECK(std::isinf(r.psnr));
}
