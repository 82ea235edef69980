#pragma once

#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "vfi/adapter.hpp"
#include "vfi/flow_estimator.hpp"
#include "vfi/imaging.hpp"

namespace vfi {

// Identifies an interpolation pair by the sequence times of its inputs.
// `reusable` marks pairs whose inputs never change during a session (real
// frames), so their flows may be cached.
struct MotionQuery {
  double t0 = 0.0;
  double t1 = 1.0;
  bool reusable = false;
};

// Produces the midpoint-to-input flows for an input pair. Everything a motion
// source returns is treated as a constant by the backward pass.
class MotionSource {
 public:
  virtual ~MotionSource() = default;
  virtual IntermediateFlows midpoint_flows(const Frame& i0, const Frame& i1,
                                           const MotionQuery& query) = 0;
};

// Frozen Horn-Schunck in both directions, optionally scaled by a bias factor
// gamma (gamma = 1 leaves the estimate untouched), then split at t = 0.5.
class EstimatorMotion final : public MotionSource {
 public:
  explicit EstimatorMotion(EstimatorParams params, double bias = 1.0);

  IntermediateFlows midpoint_flows(const Frame& i0, const Frame& i1,
                                   const MotionQuery& query) override;

  const EstimatorParams& params() const { return params_; }
  double bias() const { return bias_; }

 private:
  EstimatorParams params_;
  double bias_;
};

// Memoizes another source by (t0, t1). With `freeze_all` every query is cached,
// which pins the flows of a whole computation for finite-difference checks.
class CachedMotion final : public MotionSource {
 public:
  explicit CachedMotion(MotionSource& inner, bool freeze_all = false)
      : inner_(inner), freeze_all_(freeze_all) {}

  IntermediateFlows midpoint_flows(const Frame& i0, const Frame& i1,
                                   const MotionQuery& query) override;

  std::size_t cached_pairs() const { return cache_.size(); }
  std::size_t inner_calls() const { return inner_calls_; }

 private:
  MotionSource& inner_;
  bool freeze_all_;
  std::size_t inner_calls_ = 0;
  std::map<std::pair<double, double>, IntermediateFlows> cache_;
};

struct SynthesisTape {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::optional<ApplyTape> earlier;
  std::optional<ApplyTape> later;
  SampleJacobian warp_earlier;
  SampleJacobian warp_later;
  std::vector<unsigned char> saturated;  // 1 where the blend was clamped
  // Second-stage interpolations also return gradients for their input frames.
  bool propagate_to_sources = false;

  bool complete() const;
};

struct Interpolation {
  Frame frame;
  SynthesisTape tape;
  FlowField adapted_earlier;
  FlowField adapted_later;
};

// Midpoint synthesis: flows from `motion`, adapter applied per direction,
// both inputs backward-warped and blended 0.5/0.5, clamped to [0,1].
Interpolation interpolate(const Frame& i0, const Frame& i1, MotionSource& motion,
                          const MotionQuery& query, const AdapterParams& adapter,
                          bool propagate_to_sources = false);

Interpolation interpolate(const Frame& i0, const Frame& i1, const EstimatorParams& est,
                          const AdapterParams& adapter);

struct SourceGradients {
  Frame d_i0;
  Frame d_i1;
};

// Chains dL/dframe through the clamp, blend, warps and adapter into `grad`.
// Returns dL/d(inputs) when the tape was recorded with propagate_to_sources.
std::optional<SourceGradients> interpolate_backward(const SynthesisTape& tape,
                                                    const Frame& dL_dframe, AdapterGrad& grad);

AdapterGrad interpolate_backward(const SynthesisTape& tape, const AdapterParams& adapter,
                                 const Frame& dL_dframe);

}  // namespace vfi
