#include "vfi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "vfi/image_io.hpp"

namespace vfi {

const char* to_string(MotionKind k) {
  switch (k) {
    case MotionKind::translate: return "translate";
    case MotionKind::rotate: return "rotate";
    case MotionKind::affine: return "affine";
    case MotionKind::multiblob: return "multiblob";
  }
  return "?";
}

const char* to_string(TextureKind k) {
  switch (k) {
    case TextureKind::gaussian_blobs: return "gaussian_blobs";
    case TextureKind::sinusoid: return "sinusoid";
    case TextureKind::value_noise: return "value_noise";
  }
  return "?";
}

MotionKind parse_motion_kind(const std::string& s) {
  for (auto k : {MotionKind::translate, MotionKind::rotate, MotionKind::affine,
                 MotionKind::multiblob}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown pattern '" + s + "'");
}

TextureKind parse_texture_kind(const std::string& s) {
  for (auto k : {TextureKind::gaussian_blobs, TextureKind::sinusoid, TextureKind::value_noise}) {
    if (s == to_string(k)) return k;
  }
  if (s == "perlin" || s == "noise") return TextureKind::value_noise;
  if (s == "blobs") return TextureKind::gaussian_blobs;
  throw std::invalid_argument("unknown texture '" + s + "'");
}

double ScenePattern::max_displacement_per_frame(int width, int height) const {
  const double radius = 0.5 * std::hypot(width, height);
  const double speed = std::hypot(velocity.x, velocity.y);
  switch (kind) {
    case MotionKind::translate:
    case MotionKind::multiblob:
      return speed;
    case MotionKind::rotate:
      return std::abs(angular_rate) * radius;
    case MotionKind::affine: {
      const auto& d = affine_rate;
      return speed + std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]) * radius;
    }
  }
  return 0.0;
}

void ScenePattern::validate(int width, int height) const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("scene resolution must be positive");
  const double m = max_displacement_per_frame(width, height);
  if (!std::isfinite(m) || m > 0.25 * width) {
    throw std::invalid_argument("scene motion exceeds a quarter of the image width per frame");
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic uniform [0,1) keyed by (seed, a, b, salt).
double hash_unit(std::uint64_t seed, std::int64_t a, std::int64_t b, std::uint64_t salt) {
  std::uint64_t h = splitmix(seed ^ splitmix(salt));
  h = splitmix(h ^ static_cast<std::uint64_t>(a));
  h = splitmix(h ^ (static_cast<std::uint64_t>(b) * 0x632be59bd9b4e019ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(std::uint64_t seed, Vec2 q, double cell, std::uint64_t salt) {
  const double gx = q.x / cell;
  const double gy = q.y / cell;
  const auto ix = static_cast<std::int64_t>(std::floor(gx));
  const auto iy = static_cast<std::int64_t>(std::floor(gy));
  const double fx = quintic(gx - static_cast<double>(ix));
  const double fy = quintic(gy - static_cast<double>(iy));
  const double v00 = hash_unit(seed, ix, iy, salt);
  const double v10 = hash_unit(seed, ix + 1, iy, salt);
  const double v01 = hash_unit(seed, ix, iy + 1, salt);
  const double v11 = hash_unit(seed, ix + 1, iy + 1, salt);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

Vec2 rotate(Vec2 p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

constexpr double kBlobBackground = 0.15;
constexpr double kBandSpacing = 32.0;
constexpr double kAlongSpacing = 40.0;

}  // namespace

SyntheticScene::SyntheticScene(const ScenePattern& pattern, int width, int height,
                               std::uint64_t seed, int channels)
    : pattern_(pattern),
      width_(width),
      height_(height),
      channels_(channels),
      seed_(seed),
      centre_{0.5 * (width - 1), 0.5 * (height - 1)} {
  pattern_.validate(width, height);
  if (channels != 1 && channels != 3) throw std::invalid_argument("scene needs 1 or 3 channels");
  if (pattern_.kind != MotionKind::multiblob) return;

  // Blobs travel in parallel bands along the motion direction, one speed per
  // band.
  const double speed = std::hypot(pattern_.velocity.x, pattern_.velocity.y);
  const Vec2 along = speed > 0.0 ? Vec2{pattern_.velocity.x / speed, pattern_.velocity.y / speed}
                                 : Vec2{1.0, 0.0};
  const Vec2 across{-along.y, along.x};
  const double reach = 0.5 * std::hypot(width, height) + 6.0 * speed + kAlongSpacing;
  const int bands = static_cast<int>(std::ceil(reach / kBandSpacing));
  const int slots = static_cast<int>(std::ceil(reach / kAlongSpacing));
  for (int b = -bands; b <= bands; ++b) {
    const double sign = hash_unit(seed, b, 0, 11) < 0.5 ? -1.0 : 1.0;
    const double band_speed = sign * speed * (0.5 + 0.5 * hash_unit(seed, b, 0, 14));
    const double offset = hash_unit(seed, b, 1, 12) * kAlongSpacing;
    for (int s = -slots; s <= slots; ++s) {
      Blob blob;
      const double a = s * kAlongSpacing + offset;
      const double c = b * kBandSpacing;
      blob.centre = {centre_.x + a * along.x + c * across.x, centre_.y + a * along.y + c * across.y};
      blob.velocity = {band_speed * along.x, band_speed * along.y};
      blob.sigma = 4.0 + hash_unit(seed, b, s, 13);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        blob.colour[ch] = 0.4 + 0.4 * hash_unit(seed, b, s, 20 + ch);
      }
      blobs_.push_back(blob);
    }
  }
}

Vec2 SyntheticScene::reference_position(Vec2 p, double t) const {
  const Vec2& v = pattern_.velocity;
  switch (pattern_.kind) {
    case MotionKind::translate:
    case MotionKind::multiblob:
      return {p.x - v.x * t, p.y - v.y * t};
    case MotionKind::rotate: {
      const Vec2 r = rotate({p.x - centre_.x, p.y - centre_.y}, -pattern_.angular_rate * t);
      return {centre_.x + r.x, centre_.y + r.y};
    }
    case MotionKind::affine: {
      const auto& d = pattern_.affine_rate;
      const double a = 1.0 + t * d[0], b = t * d[1], c = t * d[2], e = 1.0 + t * d[3];
      const double det = a * e - b * c;
      const double rx = p.x - centre_.x - v.x * t;
      const double ry = p.y - centre_.y - v.y * t;
      return {centre_.x + (e * rx - b * ry) / det, centre_.y + (-c * rx + a * ry) / det};
    }
  }
  return p;
}

Vec2 SyntheticScene::forward_position(Vec2 q, double t) const {
  const Vec2& v = pattern_.velocity;
  switch (pattern_.kind) {
    case MotionKind::translate:
    case MotionKind::multiblob:
      return {q.x + v.x * t, q.y + v.y * t};
    case MotionKind::rotate: {
      const Vec2 r = rotate({q.x - centre_.x, q.y - centre_.y}, pattern_.angular_rate * t);
      return {centre_.x + r.x, centre_.y + r.y};
    }
    case MotionKind::affine: {
      const auto& d = pattern_.affine_rate;
      const double rx = q.x - centre_.x;
      const double ry = q.y - centre_.y;
      return {centre_.x + (1.0 + t * d[0]) * rx + t * d[1] * ry + v.x * t,
              centre_.y + t * d[2] * rx + (1.0 + t * d[3]) * ry + v.y * t};
    }
  }
  return q;
}

double SyntheticScene::texture(Vec2 q, int channel) const {
  const auto salt = static_cast<std::uint64_t>(channel) * 101;
  switch (pattern_.texture) {
    case TextureKind::sinusoid: {
      double value = 0.5;
      for (int k = 0; k < 3; ++k) {
        const double wavelength = 18.0 + 22.0 * hash_unit(seed_, k, 0, salt + 1);
        const double angle = 2.0 * std::numbers::pi * hash_unit(seed_, k, 1, salt + 2);
        const double phase = 2.0 * std::numbers::pi * hash_unit(seed_, k, 2, salt + 3);
        const double omega = 2.0 * std::numbers::pi / wavelength;
        value += 0.14 * std::sin(omega * (std::cos(angle) * q.x + std::sin(angle) * q.y) + phase);
      }
      return value;
    }
    case TextureKind::value_noise:
      return 0.1 + 0.55 * value_noise(seed_, q, 32.0, salt + 4) +
             0.25 * value_noise(seed_, q, 16.0, salt + 5);
    case TextureKind::gaussian_blobs: {
      constexpr double kCell = 24.0;
      const auto cx = static_cast<std::int64_t>(std::floor(q.x / kCell));
      const auto cy = static_cast<std::int64_t>(std::floor(q.y / kCell));
      double value = 0.5;
      for (std::int64_t j = cy - 2; j <= cy + 2; ++j) {
        for (std::int64_t i = cx - 2; i <= cx + 2; ++i) {
          const double bx = (static_cast<double>(i) + hash_unit(seed_, i, j, 31)) * kCell;
          const double by = (static_cast<double>(j) + hash_unit(seed_, i, j, 32)) * kCell;
          const double sigma = 4.0 + 4.0 * hash_unit(seed_, i, j, 33);
          const double amp = 0.7 * (hash_unit(seed_, i, j, 40 + salt) - 0.5);
          const double d2 = (q.x - bx) * (q.x - bx) + (q.y - by) * (q.y - by);
          value += amp * std::exp(-d2 / (2.0 * sigma * sigma));
        }
      }
      return value;
    }
  }
  return 0.0;
}

double SyntheticScene::multiblob(Vec2 p, double t, int channel) const {
  double value = kBlobBackground;
  for (const Blob& b : blobs_) {
    const double dx = p.x - b.centre.x - b.velocity.x * t;
    const double dy = p.y - b.centre.y - b.velocity.y * t;
    value += b.colour[static_cast<std::size_t>(channel)] *
             std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
  }
  return value;
}

int SyntheticScene::dominant_blob(Vec2 p, double t) const {
  int best = -1;
  double best_weight = 1e-9;
  for (std::size_t k = 0; k < blobs_.size(); ++k) {
    const Blob& b = blobs_[k];
    const double dx = p.x - b.centre.x - b.velocity.x * t;
    const double dy = p.y - b.centre.y - b.velocity.y * t;
    const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    if (w > best_weight) {
      best_weight = w;
      best = static_cast<int>(k);
    }
  }
  return best;
}

Frame SyntheticScene::render(double t) const {
  Frame f(width_, height_, channels_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      const Vec2 q = reference_position(p, t);
      for (int c = 0; c < channels_; ++c) {
        const double v = pattern_.kind == MotionKind::multiblob ? multiblob(p, t, c) : texture(q, c);
        f.at(x, y, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return f;
}

Septuplet SyntheticScene::septuplet() const {
  std::array<Frame, SeptupletView::kFrames> frames;
  for (std::size_t k = 0; k < frames.size(); ++k) frames[k] = render(static_cast<double>(k));
  return Septuplet(std::move(frames));
}

Vec2 SyntheticScene::displacement(Vec2 p, double from, double to) const {
  if (pattern_.kind == MotionKind::multiblob) {
    const int b = dominant_blob(p, from);
    if (b < 0) return {};
    const Vec2& v = blobs_[static_cast<std::size_t>(b)].velocity;
    return {v.x * (to - from), v.y * (to - from)};
  }
  const Vec2 q = forward_position(reference_position(p, from), to);
  return {q.x - p.x, q.y - p.y};
}

FlowField SyntheticScene::flow(double from, double to) const {
  FlowField f(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const Vec2 d = displacement({static_cast<double>(x), static_cast<double>(y)}, from, to);
      f.u(x, y) = d.x;
      f.v(x, y) = d.y;
    }
  }
  return f;
}

IntermediateFlows SyntheticScene::midpoint_flows(double t0, double t1) const {
  const double mid = 0.5 * (t0 + t1);
  return {flow(mid, t0), flow(mid, t1)};
}

Frame crop_interior(const Frame& frame, int margin) {
  const int w = frame.width() - 2 * margin;
  const int h = frame.height() - 2 * margin;
  if (margin < 0 || w <= 0 || h <= 0) throw std::invalid_argument("crop margin too large");
  Frame out(w, h, frame.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < frame.channels(); ++c) out.at(x, y, c) = frame.at(x + margin, y + margin, c);
    }
  }
  return out;
}

namespace {

std::filesystem::path numbered(const std::filesystem::path& dir, int k, const char* ext) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%04d%s", k, ext);
  return dir / name;
}

}  // namespace

void write_sequence_dir(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::array<Frame, SeptupletView::kFrames> frames;
  for (int k = 0; k < 7; ++k) {
    frames[static_cast<std::size_t>(k)] = scene.render(k);
    save_frame(frames[static_cast<std::size_t>(k)], numbered(dir, k + 1, ".png"));
  }
  save_frame(frames[SeptupletView::kHeldOut], dir / "gt_mid.png");
  for (int from = 1; from <= 7; ++from) {
    for (int to = 1; to <= 7; ++to) {
      if (from == to) continue;
      write_flo(scene.flow(from - 1, to - 1),
                dir / ("flow_" + std::to_string(from) + "to" + std::to_string(to) + ".flo"));
    }
  }
}

Septuplet load_sequence_dir(const std::filesystem::path& dir) {
  std::array<Frame, SeptupletView::kFrames> frames;
  for (int k = 1; k <= 7; ++k) {
    auto path = numbered(dir, k, ".png");
    if (!std::filesystem::exists(path)) path = numbered(dir, k, ".ppm");
    if (!std::filesystem::exists(path)) {
      throw std::runtime_error("missing frame " + std::to_string(k) + " in " + dir.string());
    }
    frames[static_cast<std::size_t>(k - 1)] = load_frame(path);
  }
  return Septuplet(std::move(frames));
}

}  // namespace vfi
