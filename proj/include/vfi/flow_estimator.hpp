#pragma once

#include <array>
#include <span>
#include <vector>

#include "vfi/config.hpp"
#include "vfi/imaging.hpp"

namespace vfi {

// Tunables of the frozen coarse-to-fine Horn-Schunck estimator.
struct EstimatorParams {
  double smoothness = 15.0;  // lambda, added to the data-term denominator
  int levels = 4;
  int iters_per_level = 40;
  double scale_factor = 0.5;

  void validate() const;

  // Keys: smoothness, levels, iters_per_level, scale_factor. Missing keys
  // keep the defaults.
  static EstimatorParams from_config(const KeyValueConfig& config);
  void write_to(KeyValueConfig& config) const;

  friend bool operator==(const EstimatorParams&, const EstimatorParams&) = default;
};

// Flow from `a` to `b`: b(x + F(x)) ~ a(x). Inputs must be at least 8x8 and
// large enough for the requested pyramid depth.
FlowField estimate_flow(const Frame& a, const Frame& b, const EstimatorParams& params);

struct IntermediateFlows {
  FlowField to_earlier;  // sampling offsets from time t into frame 0
  FlowField to_later;    // sampling offsets from time t into frame 1
};

// Linear-motion split: to_earlier = t * f10, to_later = (1 - t) * f01.
IntermediateFlows intermediate_flows(const FlowField& f01, const FlowField& f10, double t);

// Six analytic features per pixel: gray, Sobel-x, Sobel-y of `a`, then the
// same three of `b`. Sobel responses are scaled by 1/8.
class FeatureStack {
 public:
  static constexpr int kChannels = 6;

  FeatureStack() = default;
  FeatureStack(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::span<const double, kChannels> at(std::size_t pixel) const {
    return std::span<const double, kChannels>(values_.data() + pixel * kChannels, kChannels);
  }
  std::span<double, kChannels> at(std::size_t pixel) {
    return std::span<double, kChannels>(values_.data() + pixel * kChannels, kChannels);
  }
  double& at(int x, int y, int k) {
    return values_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                    static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(k)];
  }
  double at(int x, int y, int k) const {
    return values_[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                    static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(k)];
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  friend bool operator==(const FeatureStack&, const FeatureStack&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

FeatureStack extract_features(const Frame& a, const Frame& b);

// Adjoint of extract_features: accumulates dL/da and dL/db given dL/dfeatures.
// Needs no forward state.
void accumulate_feature_gradient(const FeatureStack& upstream, Frame& grad_a, Frame& grad_b);

}  // namespace vfi
