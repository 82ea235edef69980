#include "vfi/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace vfi {
namespace {

void require_same_shape(const Frame& a, const Frame& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": frame shapes differ");
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable "valid" filtering of a w x h plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h) {
  static const auto kTaps = gaussian_window();
  const int ow = w - kWindow + 1;
  const int oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        acc += kTaps[static_cast<std::size_t>(k)] *
               plane[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                     static_cast<std::size_t>(x + k)];
      }
      rows[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * static_cast<std::size_t>(oh));
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        acc += kTaps[static_cast<std::size_t>(k)] *
               rows[static_cast<std::size_t>(y + k) * static_cast<std::size_t>(ow) +
                    static_cast<std::size_t>(x)];
      }
      out[static_cast<std::size_t>(y) * static_cast<std::size_t>(ow) + static_cast<std::size_t>(x)] = acc;
    }
  }
  return out;
}

double ssim_channel(const Frame& a, const Frame& b, int c) {
  const int w = a.width();
  const int h = a.height();
  const std::size_t n = a.pixel_count();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int yy_ = 0; yy_ < h; ++yy_) {
    for (int xx_ = 0; xx_ < w; ++xx_) {
      const std::size_t i = static_cast<std::size_t>(yy_) * static_cast<std::size_t>(w) +
                            static_cast<std::size_t>(xx_);
      x[i] = a.at(xx_, yy_, c);
      y[i] = b.at(xx_, yy_, c);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
  }
  const auto mx = filter_valid(x, w, h);
  const auto my = filter_valid(y, w, h);
  const auto sxx = filter_valid(xx, w, h);
  const auto syy = filter_valid(yy, w, h);
  const auto sxy = filter_valid(xy, w, h);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

double psnr(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "psnr");
  const auto da = a.data();
  const auto db = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(da.size()) / sse);
}

double ssim(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "ssim");
  if (a.width() < kWindow || a.height() < kWindow) {
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  }
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) total += ssim_channel(a, b, c);
  return total / a.channels();
}

double l1_loss(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "l1_loss");
  const auto da = a.data();
  const auto db = b.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) sum += std::abs(da[i] - db[i]);
  return sum / static_cast<double>(da.size());
}

Frame l1_loss_gradient(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "l1_loss_gradient");
  Frame g(a.width(), a.height(), a.channels());
  const double inv_n = 1.0 / static_cast<double>(a.size());
  const auto da = a.data();
  const auto db = b.data();
  auto dg = g.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    dg[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
  }
  return g;
}

MetricReport measure(const Frame& a, const Frame& b) {
  return {psnr(a, b), ssim(a, b), l1_loss(a, b)};
}

}  // namespace vfi
