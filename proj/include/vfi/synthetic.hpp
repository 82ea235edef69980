#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vfi/adaptation.hpp"
#include "vfi/imaging.hpp"
#include "vfi/synthesizer.hpp"

namespace vfi {

enum class MotionKind { translate, rotate, affine, multiblob };
enum class TextureKind { gaussian_blobs, sinusoid, value_noise };

const char* to_string(MotionKind k);
const char* to_string(TextureKind k);
MotionKind parse_motion_kind(const std::string& s);
TextureKind parse_texture_kind(const std::string& s);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Analytic scene motion. `velocity` is px/frame for translate and multiblob
// and the drift component for affine; `angular_rate` is rad/frame about the
// image centre for rotate; `affine_rate` is the per-frame change of the
// linear part, A(t) = I + t * affine_rate (row-major 2x2).
struct ScenePattern {
  MotionKind kind = MotionKind::translate;
  TextureKind texture = TextureKind::sinusoid;
  Vec2 velocity;
  double angular_rate = 0.0;
  std::array<double, 4> affine_rate{};

  // Largest per-frame displacement of any pixel of a width x height frame.
  double max_displacement_per_frame(int width, int height) const;
  // Throws if the motion exceeds a quarter of the image width per frame.
  void validate(int width, int height) const;
};

// A rendered sequence plus its continuous ground truth.
class SyntheticScene {
 public:
  SyntheticScene(const ScenePattern& pattern, int width, int height, std::uint64_t seed,
                 int channels = 3);

  const ScenePattern& pattern() const { return pattern_; }
  int width() const { return width_; }
  int height() const { return height_; }

  // Frame at time t (frames are rendered at t = 0..6). Every frame is sampled
  // from the continuous texture; nothing is resampled from another frame.
  Frame render(double t) const;
  Septuplet septuplet() const;

  // Displacement carrying the point seen at pixel p at time `from` to its
  // position at time `to`.
  Vec2 displacement(Vec2 p, double from, double to) const;
  FlowField flow(double from, double to) const;

  // Exact midpoint-to-input flows for inputs at times t0 and t1.
  IntermediateFlows midpoint_flows(double t0, double t1) const;

 private:
  Vec2 reference_position(Vec2 p, double t) const;  // time-t pixel -> time-0 texture coordinate
  Vec2 forward_position(Vec2 q, double t) const;    // time-0 coordinate -> time t
  double texture(Vec2 q, int channel) const;
  double multiblob(Vec2 p, double t, int channel) const;
  int dominant_blob(Vec2 p, double t) const;

  struct Blob {
    Vec2 centre;
    Vec2 velocity;
    double sigma = 1.0;
    std::array<double, 3> colour{};
  };

  ScenePattern pattern_;
  int width_;
  int height_;
  int channels_;
  std::uint64_t seed_;
  Vec2 centre_;
  std::vector<Blob> blobs_;
};

// Motion source backed by the scene's analytic flows (queries carry times).
class OracleMotion final : public MotionSource {
 public:
  explicit OracleMotion(const SyntheticScene& scene) : scene_(scene) {}
  IntermediateFlows midpoint_flows(const Frame&, const Frame&, const MotionQuery& q) override {
    return scene_.midpoint_flows(q.t0, q.t1);
  }

 private:
  const SyntheticScene& scene_;
};

// Crops `margin` pixels from every side.
Frame crop_interior(const Frame& frame, int margin);

// Sequence directory layout: frame_0001..frame_0007.png, plus gt_mid.png and
// flow_XtoY.flo (1-based frame numbers) for synthetic sequences.
void write_sequence_dir(const SyntheticScene& scene, const std::filesystem::path& dir);
Septuplet load_sequence_dir(const std::filesystem::path& dir);

}  // namespace vfi
