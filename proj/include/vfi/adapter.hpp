#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "vfi/flow_estimator.hpp"
#include "vfi/imaging.hpp"

namespace vfi {

enum class AdapterMode : std::uint32_t { direct = 0, feature_conditioned = 1 };
enum class WarpDirection { toward_earlier = 0, toward_later = 1 };

const char* to_string(AdapterMode mode);

// Storage shared by adapter parameters and their gradients. All values live
// in one contiguous vector in serialization order:
//   direct:              alpha_earlier[N], beta_earlier[2N] (u,v interleaved),
//                        alpha_later[N],   beta_later[2N]
//   feature_conditioned: W[6x3] row-major (feature, output), bias[3]
// where the head outputs are (alpha, beta_u, beta_v).
template <typename Tag>
class AdapterTensor {
 public:
  static constexpr int kHeadInputs = FeatureStack::kChannels;
  static constexpr int kHeadOutputs = 3;

  AdapterTensor() = default;
  AdapterTensor(AdapterMode mode, int height, int width);

  template <typename OtherTag>
  static AdapterTensor zeros_like(const AdapterTensor<OtherTag>& other) {
    return AdapterTensor(other.mode(), other.height(), other.width());
  }

  AdapterMode mode() const { return mode_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t parameter_count() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  template <typename OtherTag>
  bool same_layout(const AdapterTensor<OtherTag>& other) const {
    return mode_ == other.mode() && height_ == other.height() && width_ == other.width();
  }

  // Direct mode.
  double& alpha(WarpDirection d, std::size_t pixel) { return values_[alpha_offset(d) + pixel]; }
  double alpha(WarpDirection d, std::size_t pixel) const {
    return values_[alpha_offset(d) + pixel];
  }
  double& beta_u(WarpDirection d, std::size_t pixel) {
    return values_[beta_offset(d) + 2 * pixel];
  }
  double beta_u(WarpDirection d, std::size_t pixel) const {
    return values_[beta_offset(d) + 2 * pixel];
  }
  double& beta_v(WarpDirection d, std::size_t pixel) {
    return values_[beta_offset(d) + 2 * pixel + 1];
  }
  double beta_v(WarpDirection d, std::size_t pixel) const {
    return values_[beta_offset(d) + 2 * pixel + 1];
  }

  // Feature-conditioned mode.
  double& head_weight(int feature, int output) {
    return values_[static_cast<std::size_t>(feature * kHeadOutputs + output)];
  }
  double head_weight(int feature, int output) const {
    return values_[static_cast<std::size_t>(feature * kHeadOutputs + output)];
  }
  double& head_bias(int output) {
    return values_[static_cast<std::size_t>(kHeadInputs * kHeadOutputs + output)];
  }
  double head_bias(int output) const {
    return values_[static_cast<std::size_t>(kHeadInputs * kHeadOutputs + output)];
  }

  bool all_finite() const;

  friend bool operator==(const AdapterTensor&, const AdapterTensor&) = default;

 private:
  std::size_t alpha_offset(WarpDirection d) const {
    return d == WarpDirection::toward_earlier ? 0 : 3 * pixel_count();
  }
  std::size_t beta_offset(WarpDirection d) const { return alpha_offset(d) + pixel_count(); }

  AdapterMode mode_ = AdapterMode::direct;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

struct AdapterParamsTag {};
struct AdapterGradTag {};
using AdapterParams = AdapterTensor<AdapterParamsTag>;
using AdapterGrad = AdapterTensor<AdapterGradTag>;

extern template class AdapterTensor<AdapterParamsTag>;
extern template class AdapterTensor<AdapterGradTag>;

// alpha = 1, beta = 0 (direct) or W = 0, bias = (1, 0, 0) (feature mode).
AdapterParams init_identity(int height, int width, AdapterMode mode);
bool is_identity(const AdapterParams& params);

// Everything backward() needs from one apply() call.
struct ApplyTape {
  AdapterMode mode = AdapterMode::direct;
  WarpDirection direction = WarpDirection::toward_earlier;
  int height = 0;
  int width = 0;
  FlowField input;
  std::optional<FeatureStack> features;
  // Head weights at apply time; only used in feature mode.
  std::array<double, AdapterParams::kHeadInputs * AdapterParams::kHeadOutputs> head{};
};

struct AdaptedFlow {
  FlowField flow;
  ApplyTape tape;
};

// F_hat = alpha * F + beta per pixel. `features` must be present exactly when
// the adapter is feature-conditioned.
AdaptedFlow apply(const AdapterParams& params, const FlowField& flow,
                  const FeatureStack* features, WarpDirection direction);

// Adds dL/dparams for one apply site to `grad`. In feature mode, dL/dfeatures
// is added to `feature_grad` when given.
void accumulate_backward(const ApplyTape& tape, const FlowField& upstream, AdapterGrad& grad,
                         FeatureStack* feature_grad = nullptr);

AdapterGrad backward(const ApplyTape& tape, const FlowField& upstream);

// params -= eta * grad. Throws std::domain_error, leaving params untouched, if
// any gradient entry is non-finite.
void sgd_step(AdapterParams& params, const AdapterGrad& grad, double eta);

// Header: uint32 mode, int32 height, int32 width; then float64 values in
// storage order. Little-endian.
void write_adapter(const AdapterParams& params, const std::filesystem::path& path);
AdapterParams read_adapter(const std::filesystem::path& path);
std::vector<unsigned char> serialize_adapter(const AdapterParams& params);
AdapterParams deserialize_adapter(std::span<const unsigned char> bytes);

}  // namespace vfi
