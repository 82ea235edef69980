#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vfi {

// H x W x C raster of doubles, row-major with interleaved channels.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }
  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Frame& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }
  bool same_extent(int width, int height) const {
    return width_ == width && height_ == height;
  }

  // Clamps every sample into [0,1].
  void clamp_unit();
  // Throws if any sample is non-finite or outside [0,1].
  void validate() const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Per-pixel displacement (u, v) in pixels.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height, double u = 0.0, double v = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return u_.size(); }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  double& u(int x, int y) { return u_[index(x, y)]; }
  double u(int x, int y) const { return u_[index(x, y)]; }
  double& v(int x, int y) { return v_[index(x, y)]; }
  double v(int x, int y) const { return v_[index(x, y)]; }

  std::span<double> u() { return u_; }
  std::span<const double> u() const { return u_; }
  std::span<double> v() { return v_; }
  std::span<const double> v() const { return v_; }

  bool same_extent(int width, int height) const {
    return width_ == width && height_ == height;
  }

  // Throws on non-finite entries or displacement larger than max(W, H).
  void validate() const;

  FlowField& operator*=(double s);
  FlowField operator-() const;

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> u_;
  std::vector<double> v_;
};

FlowField operator*(double s, const FlowField& f);
FlowField operator+(const FlowField& a, const FlowField& b);

// One output pixel of a bilinear backward warp.
struct BilinearTap {
  // Source pixel indices (x0,y0), (x1,y0), (x0,y1), (x1,y1).
  std::array<std::size_t, 4> source{};
  std::array<double, 4> weight{};
  // Top-left cell corner; used to detect cell changes between evaluations.
  int cell_x = 0;
  int cell_y = 0;
  bool clamped_x = false;
  bool clamped_y = false;
};

// Everything the warp adjoint needs: one tap per output pixel and the
// derivatives of every output sample with respect to the pixel's flow.
struct SampleJacobian {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<BilinearTap> taps;
  std::vector<double> d_du;  // width*height*channels
  std::vector<double> d_dv;

  bool empty() const { return taps.empty(); }
};

struct WarpResult {
  Frame frame;
  SampleJacobian jacobian;
};

// out(x,y,c) = src sampled bilinearly at (x+u, y+v), clamp-to-edge.
// At exact integer coordinates the right/lower cell is used.
WarpResult backward_warp(const Frame& src, const FlowField& flow);

// Warp without recording a Jacobian.
Frame warp_frame(const Frame& src, const FlowField& flow);

// Adjoint of the warp with respect to the flow: g_u = sum_c up * d_du.
FlowField warp_flow_gradient(const SampleJacobian& jac, const Frame& upstream);

// Adjoint of the warp with respect to the source frame (scatter of weights),
// accumulated into `source_grad`, which must match the source shape.
void accumulate_warp_source_gradient(const SampleJacobian& jac, const Frame& upstream,
                                     Frame& source_grad);

// Separable [1 4 6 4 1]/16 blur with clamp-to-edge.
Frame gaussian_blur5(const Frame& frame);

// Bilinear resampling with pixel-centre alignment.
Frame resize_bilinear(const Frame& frame, int width, int height);
FlowField resize_bilinear(const FlowField& flow, int width, int height);

// Level 0 is the input; each following level is blurred then resized to
// round(dim * factor). Throws if any level would be smaller than 4x4.
std::vector<Frame> gaussian_pyramid(const Frame& frame, int levels, double factor);

// Luma 0.299R + 0.587G + 0.114B for three-channel frames; copy for one channel.
Frame to_gray(const Frame& frame);

}  // namespace vfi
