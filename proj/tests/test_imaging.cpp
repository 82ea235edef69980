#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "vfi/imaging.hpp"

using namespace vfi;

TEST_CASE("frame and flow construction") {
  Frame f(4, 3, 3, 0.5);
  CHECK(f.size() == 36);
  CHECK(f.at(3, 2, 2) == 0.5);
  CHECK_THROWS_AS(Frame(0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(Frame(2, 2, 2), std::invalid_argument);

  FlowField g(5, 2, 1.0, -1.0);
  CHECK(g.pixel_count() == 10);
  CHECK(g.u(4, 1) == 1.0);
  CHECK(g.v(0, 0) == -1.0);
  g.u(0, 0) = NAN;
  CHECK_THROWS(g.validate());
  FlowField big(4, 4, 5.0, 0.0);
  CHECK_THROWS(big.validate());
}

TEST_CASE("frame validate rejects out of range samples") {
  Frame f(2, 2, 1, 0.5);
  CHECK_NOTHROW(f.validate());
  f.at(1, 1, 0) = 1.5;
  CHECK_THROWS(f.validate());
  f.clamp_unit();
  CHECK(f.at(1, 1, 0) == 1.0);
}

TEST_CASE("zero flow is identity") {
  testing::Rng rng(1);
  for (int c : {1, 3}) {
    const Frame f = testing::random_frame(rng, 7, 5, c);
    const WarpResult r = backward_warp(f, FlowField(7, 5));
    CHECK(r.frame == f);
    // Derivatives are the differences across the right/lower cell (last cell at the far edge).
    for (int y = 0; y < 5; ++y) {
      for (int x = 0; x < 7; ++x) {
        const int x0 = std::min(x, 5);
        const int y0 = std::min(y, 3);
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t o = r.frame.index(x, y, ch);
          const double expect_u = f.at(x0 + 1, y, ch) - f.at(x0, y, ch);
          const double expect_v = f.at(x, y0 + 1, ch) - f.at(x, y0, ch);
          CHECK(r.jacobian.d_du[o] == doctest::Approx(expect_u).epsilon(1e-12));
          CHECK(r.jacobian.d_dv[o] == doctest::Approx(expect_v).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("integer shift of a ramp") {
  Frame ramp(8, 8, 1);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) ramp.at(x, y, 0) = x / 7.0;
  }
  const Frame out = warp_frame(ramp, FlowField(8, 8, 2.0, 0.0));
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x <= 5; ++x) CHECK(std::abs(out.at(x, y, 0) - (x + 2) / 7.0) < 1e-12);
    // Past the edge the last column repeats.
    CHECK(out.at(7, y, 0) == 1.0);
  }
}

TEST_CASE("integer translations reproduce the shifted interior") {
  testing::Rng rng(2);
  const Frame f = testing::random_frame(rng, 12, 10, 3);
  for (int dx = -3; dx <= 3; ++dx) {
    for (int dy = -2; dy <= 2; ++dy) {
      const Frame out = warp_frame(f, FlowField(12, 10, dx, dy));
      for (int y = std::max(0, -dy); y < std::min(10, 10 - dy); ++y) {
        for (int x = std::max(0, -dx); x < std::min(12, 12 - dx); ++x) {
          for (int c = 0; c < 3; ++c) CHECK(std::abs(out.at(x, y, c) - f.at(x + dx, y + dy, c)) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("warp is linear in the source") {
  testing::Rng rng(3);
  const Frame a = testing::random_frame(rng, 9, 7);
  const Frame b = testing::random_frame(rng, 9, 7);
  const FlowField flow = testing::random_flow(rng, 9, 7, 3.0);
  const double ka = 0.7;
  const double kb = -1.3;
  Frame mix(9, 7, 3);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = ka * a.data()[i] + kb * b.data()[i];
  const Frame wm = warp_frame(mix, flow);
  const Frame wa = warp_frame(a, flow);
  const Frame wb = warp_frame(b, flow);
  for (std::size_t i = 0; i < wm.size(); ++i) {
    CHECK(std::abs(wm.data()[i] - (ka * wa.data()[i] + kb * wb.data()[i])) < 1e-12);
  }
}

TEST_CASE("bilinear weights sum to one") {
  testing::Rng rng(4);
  const Frame f = testing::random_frame(rng, 11, 6);
  const WarpResult r = backward_warp(f, testing::random_flow(rng, 11, 6, 8.0));
  for (const auto& tap : r.jacobian.taps) {
    double s = 0.0;
    for (double w : tap.weight) s += w;
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  for (double d : r.jacobian.d_du) CHECK(std::isfinite(d));
}

TEST_CASE("flow jacobian matches central differences") {
  testing::Rng rng(5);
  const double eps = 1e-4;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Frame f = testing::random_frame(rng, 4, 4);
    FlowField flow = testing::random_flow(rng, 4, 4, 1.2);
    const WarpResult base = backward_warp(f, flow);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const double px = x + flow.u(x, y);
        const double py = y + flow.v(x, y);
        const auto near_grid = [](double p) { return std::abs(p - std::round(p)) < 1e-3; };
        if (near_grid(px) || near_grid(py) || px < 0 || py < 0 || px > 3 || py > 3) continue;
        for (int comp = 0; comp < 2; ++comp) {
          double& d = comp == 0 ? flow.u(x, y) : flow.v(x, y);
          const double keep = d;
          d = keep + eps;
          const Frame plus = warp_frame(f, flow);
          d = keep - eps;
          const Frame minus = warp_frame(f, flow);
          d = keep;
          for (int c = 0; c < 3; ++c) {
            const std::size_t o = f.index(x, y, c);
            const double numeric = (plus.data()[o] - minus.data()[o]) / (2 * eps);
            const double analytic = comp == 0 ? base.jacobian.d_du[o] : base.jacobian.d_dv[o];
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-9});
            CHECK(std::abs(numeric - analytic) / denom < 1e-6);
            ++checked;
          }
        }
      }
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("flow derivatives vanish where sampling is clamped") {
  testing::Rng rng(6);
  const Frame f = testing::random_frame(rng, 5, 5);
  const WarpResult r = backward_warp(f, FlowField(5, 5, -10.0, 0.3));
  for (int y = 0; y < 5; ++y) {
    CHECK(r.jacobian.taps[static_cast<std::size_t>(y * 5)].clamped_x);
    for (int c = 0; c < 3; ++c) CHECK(r.jacobian.d_du[f.index(0, y, c)] == 0.0);
  }
}

TEST_CASE("warp adjoints") {
  testing::Rng rng(7);
  const Frame f = testing::random_frame(rng, 6, 5);
  const FlowField flow = testing::random_flow(rng, 6, 5, 2.0);
  const WarpResult r = backward_warp(f, flow);
  const Frame up = testing::random_frame(rng, 6, 5);

  // <up, W f> = <W^T up, f>
  Frame back(6, 5, 3);
  accumulate_warp_source_gradient(r.jacobian, up, back);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    lhs += up.data()[i] * r.frame.data()[i];
    rhs += back.data()[i] * f.data()[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  const FlowField g = warp_flow_gradient(r.jacobian, up);
  double gu = 0.0;
  for (int c = 0; c < 3; ++c) gu += up.data()[f.index(2, 3, c)] * r.jacobian.d_du[f.index(2, 3, c)];
  CHECK(g.u(2, 3) == doctest::Approx(gu));

  Frame wrong(5, 5, 3);
  CHECK_THROWS_AS(accumulate_warp_source_gradient(r.jacobian, up, wrong), std::invalid_argument);
}

TEST_CASE("warp rejects bad inputs") {
  Frame f(4, 4, 1);
  CHECK_THROWS_AS(backward_warp(f, FlowField(4, 5)), std::invalid_argument);
  FlowField nan(4, 4);
  nan.u(1, 1) = NAN;
  CHECK_THROWS_AS(backward_warp(f, nan), std::invalid_argument);
}

TEST_CASE("gaussian pyramid") {
  testing::Rng rng(8);
  const Frame f = testing::random_frame(rng, 64, 64);
  const auto one = gaussian_pyramid(f, 1, 0.5);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == f);

  const auto three = gaussian_pyramid(f, 3, 0.5);
  REQUIRE(three.size() == 3);
  CHECK(three[0].width() == 64);
  CHECK(three[1].width() == 32);
  CHECK(three[2].width() == 16);
  CHECK(three[2].height() == 16);

  const auto flat = gaussian_pyramid(Frame(40, 30, 3, 0.5), 4, 0.6);
  for (const Frame& level : flat) {
    for (double v : level.data()) CHECK(std::abs(v - 0.5) < 1e-12);
  }
  CHECK_THROWS_AS(gaussian_pyramid(f, 6, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_pyramid(f, 0, 0.5), std::invalid_argument);
}

TEST_CASE("resize and gray conversion") {
  Frame f(4, 4, 3, 0.25);
  const Frame r = resize_bilinear(f, 7, 3);
  CHECK(r.width() == 7);
  for (double v : r.data()) CHECK(v == doctest::Approx(0.25));

  FlowField flow(8, 8, 1.5, -2.0);
  const FlowField small = resize_bilinear(flow, 4, 4);
  CHECK(small.u(2, 2) == doctest::Approx(1.5));

  Frame rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 1.0;
  rgb.at(0, 0, 1) = 0.5;
  const Frame g = to_gray(rgb);
  CHECK(g.channels() == 1);
  CHECK(g.at(0, 0, 0) == doctest::Approx(0.299 + 0.5 * 0.587));
}
