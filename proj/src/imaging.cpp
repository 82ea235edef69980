#include "vfi/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vfi {

Frame::Frame(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("frame dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("frame must have 1 or 3 channels, got " +
                                std::to_string(channels));
  }
  data_.assign(pixel_count() * static_cast<std::size_t>(channels), fill);
}

void Frame::clamp_unit() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

void Frame::validate() const {
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels_)) {
    throw std::invalid_argument("frame data length does not match dimensions");
  }
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument("frame sample outside [0,1]");
    }
  }
}

FlowField::FlowField(int width, int height, double u, double v)
    : width_(width), height_(height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("flow dimensions must be positive");
  }
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  u_.assign(n, u);
  v_.assign(n, v);
}

void FlowField::validate() const {
  const double bound = static_cast<double>(std::max(width_, height_));
  for (std::size_t i = 0; i < u_.size(); ++i) {
    if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) {
      throw std::invalid_argument("flow contains non-finite displacement");
    }
    if (std::hypot(u_[i], v_[i]) > bound) {
      throw std::invalid_argument("flow displacement exceeds image extent");
    }
  }
}

FlowField& FlowField::operator*=(double s) {
  for (double& x : u_) x *= s;
  for (double& x : v_) x *= s;
  return *this;
}

FlowField FlowField::operator-() const {
  FlowField out = *this;
  out *= -1.0;
  return out;
}

FlowField operator*(double s, const FlowField& f) {
  FlowField out = f;
  out *= s;
  return out;
}

FlowField operator+(const FlowField& a, const FlowField& b) {
  if (!a.same_extent(b.width(), b.height())) {
    throw std::invalid_argument("flow extents differ");
  }
  FlowField out = a;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    out.u()[i] += b.u()[i];
    out.v()[i] += b.v()[i];
  }
  return out;
}

namespace {

struct Axis {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
  bool clamped = false;
};

// Locates the bilinear cell along one axis of length n.
Axis locate(double coord, int n) {
  Axis a;
  const double max_coord = static_cast<double>(n - 1);
  if (coord < 0.0) {
    coord = 0.0;
    a.clamped = true;
  } else if (coord > max_coord) {
    coord = max_coord;
    a.clamped = true;
  }
  if (n == 1) return a;
  int lo = static_cast<int>(std::floor(coord));
  if (lo >= n - 1) lo = n - 2;
  a.lo = lo;
  a.hi = lo + 1;
  a.frac = coord - static_cast<double>(lo);
  return a;
}

void check_warp_inputs(const Frame& src, const FlowField& flow) {
  if (!flow.same_extent(src.width(), src.height())) {
    throw std::invalid_argument("warp: flow and frame dimensions differ");
  }
  for (std::size_t i = 0; i < flow.pixel_count(); ++i) {
    if (!std::isfinite(flow.u()[i]) || !std::isfinite(flow.v()[i])) {
      throw std::invalid_argument("warp: non-finite flow");
    }
  }
}

}  // namespace

WarpResult backward_warp(const Frame& src, const FlowField& flow) {
  check_warp_inputs(src, flow);
  const int w = src.width();
  const int h = src.height();
  const int nc = src.channels();
  const auto pixels = src.data();

  WarpResult result{Frame(w, h, nc), {}};
  SampleJacobian& jac = result.jacobian;
  jac.width = w;
  jac.height = h;
  jac.channels = nc;
  jac.taps.resize(src.pixel_count());
  jac.d_du.assign(src.size(), 0.0);
  jac.d_dv.assign(src.size(), 0.0);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = flow.index(x, y);
      const Axis ax = locate(static_cast<double>(x) + flow.u()[p], w);
      const Axis ay = locate(static_cast<double>(y) + flow.v()[p], h);

      BilinearTap& tap = jac.taps[p];
      tap.cell_x = ax.lo;
      tap.cell_y = ay.lo;
      tap.clamped_x = ax.clamped;
      tap.clamped_y = ay.clamped;
      const auto at = [w](int xx, int yy) {
        return static_cast<std::size_t>(yy) * static_cast<std::size_t>(w) +
               static_cast<std::size_t>(xx);
      };
      tap.source = {at(ax.lo, ay.lo), at(ax.hi, ay.lo), at(ax.lo, ay.hi),
                    at(ax.hi, ay.hi)};
      tap.weight = {(1.0 - ax.frac) * (1.0 - ay.frac), ax.frac * (1.0 - ay.frac),
                    (1.0 - ax.frac) * ay.frac, ax.frac * ay.frac};

      const bool moves_x = !ax.clamped && w > 1;
      const bool moves_y = !ay.clamped && h > 1;
      for (int c = 0; c < nc; ++c) {
        const auto sample = [&](std::size_t pix) {
          return pixels[pix * static_cast<std::size_t>(nc) + static_cast<std::size_t>(c)];
        };
        const double s00 = sample(tap.source[0]);
        const double s10 = sample(tap.source[1]);
        const double s01 = sample(tap.source[2]);
        const double s11 = sample(tap.source[3]);
        const std::size_t o = result.frame.index(x, y, c);
        result.frame.data()[o] = tap.weight[0] * s00 + tap.weight[1] * s10 +
                                 tap.weight[2] * s01 + tap.weight[3] * s11;
        if (moves_x) {
          jac.d_du[o] = (1.0 - ay.frac) * (s10 - s00) + ay.frac * (s11 - s01);
        }
        if (moves_y) {
          jac.d_dv[o] = (1.0 - ax.frac) * (s01 - s00) + ax.frac * (s11 - s10);
        }
      }
    }
  }
  return result;
}

Frame warp_frame(const Frame& src, const FlowField& flow) {
  return backward_warp(src, flow).frame;
}

FlowField warp_flow_gradient(const SampleJacobian& jac, const Frame& upstream) {
  if (!upstream.same_extent(jac.width, jac.height) || upstream.channels() != jac.channels) {
    throw std::invalid_argument("warp gradient: upstream shape mismatch");
  }
  FlowField g(jac.width, jac.height);
  const auto up = upstream.data();
  const auto nc = static_cast<std::size_t>(jac.channels);
  for (std::size_t p = 0; p < jac.taps.size(); ++p) {
    double gu = 0.0;
    double gv = 0.0;
    for (std::size_t c = 0; c < nc; ++c) {
      gu += up[p * nc + c] * jac.d_du[p * nc + c];
      gv += up[p * nc + c] * jac.d_dv[p * nc + c];
    }
    g.u()[p] = gu;
    g.v()[p] = gv;
  }
  return g;
}

void accumulate_warp_source_gradient(const SampleJacobian& jac, const Frame& upstream,
                                     Frame& source_grad) {
  if (!upstream.same_extent(jac.width, jac.height) || upstream.channels() != jac.channels ||
      !source_grad.same_shape(upstream)) {
    throw std::invalid_argument("warp source gradient: shape mismatch");
  }
  const auto up = upstream.data();
  auto out = source_grad.data();
  const auto nc = static_cast<std::size_t>(jac.channels);
  for (std::size_t p = 0; p < jac.taps.size(); ++p) {
    const BilinearTap& tap = jac.taps[p];
    for (int k = 0; k < 4; ++k) {
      const double w = tap.weight[static_cast<std::size_t>(k)];
      if (w == 0.0) continue;
      const std::size_t s = tap.source[static_cast<std::size_t>(k)] * nc;
      for (std::size_t c = 0; c < nc; ++c) out[s + c] += w * up[p * nc + c];
    }
  }
}

Frame gaussian_blur5(const Frame& frame) {
  static constexpr std::array<double, 5> kTaps = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16,
                                                  1.0 / 16};
  const int w = frame.width();
  const int h = frame.height();
  const int nc = frame.channels();
  Frame tmp(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          const int xx = std::clamp(x + k, 0, w - 1);
          acc += kTaps[static_cast<std::size_t>(k + 2)] * frame.at(xx, y, c);
        }
        tmp.at(x, y, c) = acc;
      }
    }
  }
  Frame out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int k = -2; k <= 2; ++k) {
          const int yy = std::clamp(y + k, 0, h - 1);
          acc += kTaps[static_cast<std::size_t>(k + 2)] * tmp.at(x, yy, c);
        }
        out.at(x, y, c) = acc;
      }
    }
  }
  return out;
}

namespace {

// Source coordinate of destination sample `i` under pixel-centre alignment.
Axis resample_axis(int i, int dst, int src) {
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  return locate((static_cast<double>(i) + 0.5) * scale - 0.5, src);
}

template <typename Sample>
double bilerp(const Axis& ax, const Axis& ay, Sample&& sample) {
  return (1.0 - ay.frac) * ((1.0 - ax.frac) * sample(ax.lo, ay.lo) + ax.frac * sample(ax.hi, ay.lo)) +
         ay.frac * ((1.0 - ax.frac) * sample(ax.lo, ay.hi) + ax.frac * sample(ax.hi, ay.hi));
}

}  // namespace

Frame resize_bilinear(const Frame& frame, int width, int height) {
  Frame out(width, height, frame.channels());
  for (int y = 0; y < height; ++y) {
    const Axis ay = resample_axis(y, height, frame.height());
    for (int x = 0; x < width; ++x) {
      const Axis ax = resample_axis(x, width, frame.width());
      for (int c = 0; c < frame.channels(); ++c) {
        out.at(x, y, c) =
            bilerp(ax, ay, [&](int xx, int yy) { return frame.at(xx, yy, c); });
      }
    }
  }
  return out;
}

FlowField resize_bilinear(const FlowField& flow, int width, int height) {
  FlowField out(width, height);
  for (int y = 0; y < height; ++y) {
    const Axis ay = resample_axis(y, height, flow.height());
    for (int x = 0; x < width; ++x) {
      const Axis ax = resample_axis(x, width, flow.width());
      out.u(x, y) = bilerp(ax, ay, [&](int xx, int yy) { return flow.u(xx, yy); });
      out.v(x, y) = bilerp(ax, ay, [&](int xx, int yy) { return flow.v(xx, yy); });
    }
  }
  return out;
}

std::vector<Frame> gaussian_pyramid(const Frame& frame, int levels, double factor) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  if (!(factor > 0.0 && factor < 1.0)) {
    throw std::invalid_argument("pyramid factor must lie in (0,1)");
  }
  std::vector<Frame> pyramid;
  pyramid.reserve(static_cast<std::size_t>(levels));
  pyramid.push_back(frame);
  for (int l = 1; l < levels; ++l) {
    const Frame& prev = pyramid.back();
    const int w = static_cast<int>(std::lround(prev.width() * factor));
    const int h = static_cast<int>(std::lround(prev.height() * factor));
    if (w < 4 || h < 4) {
      throw std::invalid_argument("pyramid too deep: level " + std::to_string(l) +
                                  " would be " + std::to_string(w) + "x" +
                                  std::to_string(h));
    }
    pyramid.push_back(resize_bilinear(gaussian_blur5(prev), w, h));
  }
  return pyramid;
}

Frame to_gray(const Frame& frame) {
  if (frame.channels() == 1) return frame;
  Frame out(frame.width(), frame.height(), 1);
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      out.at(x, y, 0) = 0.299 * frame.at(x, y, 0) + 0.587 * frame.at(x, y, 1) +
                        0.114 * frame.at(x, y, 2);
    }
  }
  return out;
}

}  // namespace vfi
