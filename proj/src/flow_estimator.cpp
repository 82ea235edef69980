#include "vfi/flow_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vfi {

void EstimatorParams::validate() const {
  if (!(std::isfinite(smoothness) && smoothness >= 0.0)) {
    throw std::invalid_argument("smoothness must be finite and >= 0");
  }
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");
  if (iters_per_level < 1) throw std::invalid_argument("iters_per_level must be >= 1");
  if (!(scale_factor > 0.0 && scale_factor < 1.0)) {
    throw std::invalid_argument("scale_factor must lie in (0,1)");
  }
}

EstimatorParams EstimatorParams::from_config(const KeyValueConfig& config) {
  EstimatorParams p;
  p.smoothness = config.get_double("smoothness", p.smoothness);
  p.levels = config.get_int("levels", p.levels);
  p.iters_per_level = config.get_int("iters_per_level", p.iters_per_level);
  p.scale_factor = config.get_double("scale_factor", p.scale_factor);
  p.validate();
  return p;
}

void EstimatorParams::write_to(KeyValueConfig& config) const {
  config.set("smoothness", smoothness);
  config.set("levels", levels);
  config.set("iters_per_level", iters_per_level);
  config.set("scale_factor", scale_factor);
}

namespace {

// Horn-Schunck runs on 0..255 intensities.
constexpr double kIntensityScale = 255.0;

Frame scaled_gray(const Frame& f) {
  Frame g = to_gray(f);
  for (double& v : g.data()) v *= kIntensityScale;
  return g;
}

// Horn-Schunck neighbourhood average: 1/6 edge neighbours, 1/12 diagonals.
double neighbour_average(std::span<const double> field, int x, int y, int w, int h) {
  const auto at = [&](int xx, int yy) {
    xx = std::clamp(xx, 0, w - 1);
    yy = std::clamp(yy, 0, h - 1);
    return field[static_cast<std::size_t>(yy) * static_cast<std::size_t>(w) +
                 static_cast<std::size_t>(xx)];
  };
  return (at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1)) / 6.0 +
         (at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1)) / 12.0;
}

void refine_level(const Frame& a, const Frame& b, FlowField& flow, const EstimatorParams& p) {
  const int w = a.width();
  const int h = a.height();
  const Frame warped = warp_frame(b, flow);

  const std::size_t n = a.pixel_count();
  std::vector<double> ix(n), iy(n), it(n);
  const auto mean_at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return 0.5 * (a.at(x, y, 0) + warped.at(x, y, 0));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = flow.index(x, y);
      ix[i] = 0.5 * (mean_at(x + 1, y) - mean_at(x - 1, y));
      iy[i] = 0.5 * (mean_at(x, y + 1) - mean_at(x, y - 1));
      it[i] = warped.at(x, y, 0) - a.at(x, y, 0);
    }
  }

  const FlowField base = flow;
  FlowField next = flow;
  for (int k = 0; k < p.iters_per_level; ++k) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = flow.index(x, y);
        const double ub = neighbour_average(flow.u(), x, y, w, h);
        const double vb = neighbour_average(flow.v(), x, y, w, h);
        const double denom = p.smoothness + ix[i] * ix[i] + iy[i] * iy[i];
        if (denom > 0.0) {
          const double r =
              (ix[i] * (ub - base.u()[i]) + iy[i] * (vb - base.v()[i]) + it[i]) / denom;
          next.u()[i] = ub - ix[i] * r;
          next.v()[i] = vb - iy[i] * r;
        } else {
          next.u()[i] = ub;
          next.v()[i] = vb;
        }
      }
    }
    std::swap(flow, next);
  }
}

}  // namespace

FlowField estimate_flow(const Frame& a, const Frame& b, const EstimatorParams& params) {
  params.validate();
  if (!a.same_shape(b)) throw std::invalid_argument("estimate_flow: frame shapes differ");
  if (a.width() < 8 || a.height() < 8) {
    throw std::invalid_argument("estimate_flow: frames must be at least 8x8");
  }
  const auto pa = gaussian_pyramid(scaled_gray(a), params.levels, params.scale_factor);
  const auto pb = gaussian_pyramid(scaled_gray(b), params.levels, params.scale_factor);

  FlowField flow(pa.back().width(), pa.back().height());
  for (int l = params.levels - 1; l >= 0; --l) {
    const Frame& la = pa[static_cast<std::size_t>(l)];
    if (!flow.same_extent(la.width(), la.height())) {
      flow = resize_bilinear(flow, la.width(), la.height());
      flow *= 1.0 / params.scale_factor;
    }
    refine_level(la, pb[static_cast<std::size_t>(l)], flow, params);
  }
  return flow;
}

IntermediateFlows intermediate_flows(const FlowField& f01, const FlowField& f10, double t) {
  if (!f01.same_extent(f10.width(), f10.height())) {
    throw std::invalid_argument("intermediate_flows: flow extents differ");
  }
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("intermediate_flows: t must lie in (0,1)");
  return {t * f10, (1.0 - t) * f01};
}

FeatureStack::FeatureStack(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("feature stack must be non-empty");
  values_.assign(pixel_count() * kChannels, 0.0);
}

namespace {

constexpr std::array<double, 3> kLuma = {0.299, 0.587, 0.114};
// Sobel-x rows (top to bottom) over columns dx = -1..1; Sobel-y is its transpose.
constexpr std::array<std::array<double, 3>, 3> kSobelX = {{{-1.0, 0.0, 1.0},
                                                          {-2.0, 0.0, 2.0},
                                                          {-1.0, 0.0, 1.0}}};
constexpr double kSobelNorm = 1.0 / 8.0;

void fill_features(const Frame& f, FeatureStack& out, int offset) {
  const Frame g = to_gray(f);
  const int w = g.width();
  const int h = g.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto at = [&](int dx, int dy) {
        return g.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1), 0);
      };
      double gx = 0.0;
      double gy = 0.0;
      for (int k = -1; k <= 1; ++k) {
        const double weight = k == 0 ? 2.0 : 1.0;
        gx += weight * (at(1, k) - at(-1, k));
        gy += weight * (at(k, 1) - at(k, -1));
      }
      out.at(x, y, offset) = g.at(x, y, 0);
      out.at(x, y, offset + 1) = kSobelNorm * gx;
      out.at(x, y, offset + 2) = kSobelNorm * gy;
    }
  }
}

void backprop_features(const FeatureStack& up, int offset, Frame& grad) {
  const int w = up.width();
  const int h = up.height();
  Frame gray_grad(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gray_grad.at(x, y, 0) += up.at(x, y, offset);
      const double gx = kSobelNorm * up.at(x, y, offset + 1);
      const double gy = kSobelNorm * up.at(x, y, offset + 2);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          gray_grad.at(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1), 0) +=
              kSobelX[static_cast<std::size_t>(dy + 1)][static_cast<std::size_t>(dx + 1)] * gx +
              kSobelX[static_cast<std::size_t>(dx + 1)][static_cast<std::size_t>(dy + 1)] * gy;
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (grad.channels() == 1) {
        grad.at(x, y, 0) += gray_grad.at(x, y, 0);
      } else {
        for (int c = 0; c < 3; ++c) {
          grad.at(x, y, c) += kLuma[static_cast<std::size_t>(c)] * gray_grad.at(x, y, 0);
        }
      }
    }
  }
}

}  // namespace

FeatureStack extract_features(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("extract_features: frame shapes differ");
  FeatureStack out(a.width(), a.height());
  fill_features(a, out, 0);
  fill_features(b, out, 3);
  return out;
}

void accumulate_feature_gradient(const FeatureStack& upstream, Frame& grad_a, Frame& grad_b) {
  if (!grad_a.same_extent(upstream.width(), upstream.height()) || !grad_a.same_shape(grad_b)) {
    throw std::invalid_argument("feature gradient: shape mismatch");
  }
  backprop_features(upstream, 0, grad_a);
  backprop_features(upstream, 3, grad_b);
}

}  // namespace vfi
