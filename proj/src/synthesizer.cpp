#include "vfi/synthesizer.hpp"

#include <cmath>
#include <stdexcept>

namespace vfi {

EstimatorMotion::EstimatorMotion(EstimatorParams params, double bias)
    : params_(params), bias_(bias) {
  params_.validate();
  if (!(bias > 0.0 && bias <= 1.0)) throw std::invalid_argument("flow bias must lie in (0,1]");
}

IntermediateFlows EstimatorMotion::midpoint_flows(const Frame& i0, const Frame& i1,
                                                  const MotionQuery&) {
  FlowField f01 = estimate_flow(i0, i1, params_);
  FlowField f10 = estimate_flow(i1, i0, params_);
  if (bias_ != 1.0) {
    f01 *= bias_;
    f10 *= bias_;
  }
  return intermediate_flows(f01, f10, 0.5);
}

IntermediateFlows CachedMotion::midpoint_flows(const Frame& i0, const Frame& i1,
                                               const MotionQuery& query) {
  if (!query.reusable && !freeze_all_) {
    ++inner_calls_;
    return inner_.midpoint_flows(i0, i1, query);
  }
  const auto key = std::make_pair(query.t0, query.t1);
  if (const auto it = cache_.find(key); it != cache_.end()) return it->second;
  ++inner_calls_;
  return cache_.emplace(key, inner_.midpoint_flows(i0, i1, query)).first->second;
}

bool SynthesisTape::complete() const {
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  return earlier.has_value() && later.has_value() && warp_earlier.taps.size() == n &&
         warp_later.taps.size() == n && saturated.size() == n * static_cast<std::size_t>(channels);
}

Interpolation interpolate(const Frame& i0, const Frame& i1, MotionSource& motion,
                          const MotionQuery& query, const AdapterParams& adapter,
                          bool propagate_to_sources) {
  if (!i0.same_shape(i1)) throw std::invalid_argument("interpolate: input shapes differ");
  if (adapter.width() != i0.width() || adapter.height() != i0.height()) {
    throw std::invalid_argument("interpolate: adapter extent does not match frames");
  }
  const IntermediateFlows flows = motion.midpoint_flows(i0, i1, query);

  std::optional<FeatureStack> features;
  if (adapter.mode() == AdapterMode::feature_conditioned) features = extract_features(i0, i1);
  const FeatureStack* feats = features ? &*features : nullptr;

  AdaptedFlow earlier = apply(adapter, flows.to_earlier, feats, WarpDirection::toward_earlier);
  AdaptedFlow later = apply(adapter, flows.to_later, feats, WarpDirection::toward_later);
  WarpResult w0 = backward_warp(i0, earlier.flow);
  WarpResult w1 = backward_warp(i1, later.flow);

  Interpolation out{Frame(i0.width(), i0.height(), i0.channels()), {}, std::move(earlier.flow),
                    std::move(later.flow)};
  SynthesisTape& tape = out.tape;
  tape.width = i0.width();
  tape.height = i0.height();
  tape.channels = i0.channels();
  tape.saturated.assign(out.frame.size(), 0);

  auto dst = out.frame.data();
  const auto a = w0.frame.data();
  const auto b = w1.frame.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double v = 0.5 * a[i] + 0.5 * b[i];
    if (v < 0.0) {
      dst[i] = 0.0;
      tape.saturated[i] = 1;
    } else if (v > 1.0) {
      dst[i] = 1.0;
      tape.saturated[i] = 1;
    } else {
      dst[i] = v;
    }
  }

  tape.earlier = std::move(earlier.tape);
  tape.later = std::move(later.tape);
  tape.warp_earlier = std::move(w0.jacobian);
  tape.warp_later = std::move(w1.jacobian);
  tape.propagate_to_sources = propagate_to_sources;
  return out;
}

Interpolation interpolate(const Frame& i0, const Frame& i1, const EstimatorParams& est,
                          const AdapterParams& adapter) {
  EstimatorMotion motion(est);
  return interpolate(i0, i1, motion, MotionQuery{}, adapter);
}

std::optional<SourceGradients> interpolate_backward(const SynthesisTape& tape,
                                                    const Frame& dL_dframe, AdapterGrad& grad) {
  if (!tape.complete()) throw std::logic_error("interpolate_backward: incomplete tape");
  if (!dL_dframe.same_extent(tape.width, tape.height) || dL_dframe.channels() != tape.channels) {
    throw std::invalid_argument("interpolate_backward: gradient shape does not match frame");
  }

  // Blend weight 0.5 per branch; zero where the output was clamped.
  Frame branch(tape.width, tape.height, tape.channels);
  {
    const auto g = dL_dframe.data();
    auto dst = branch.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = tape.saturated[i] ? 0.0 : 0.5 * g[i];
  }

  const bool feature_mode = tape.earlier->mode == AdapterMode::feature_conditioned;
  std::optional<FeatureStack> feature_grad;
  if (feature_mode && tape.propagate_to_sources) feature_grad.emplace(tape.width, tape.height);
  FeatureStack* fg = feature_grad ? &*feature_grad : nullptr;

  accumulate_backward(*tape.earlier, warp_flow_gradient(tape.warp_earlier, branch), grad, fg);
  accumulate_backward(*tape.later, warp_flow_gradient(tape.warp_later, branch), grad, fg);

  if (!tape.propagate_to_sources) return std::nullopt;
  SourceGradients src{Frame(tape.width, tape.height, tape.channels),
                      Frame(tape.width, tape.height, tape.channels)};
  accumulate_warp_source_gradient(tape.warp_earlier, branch, src.d_i0);
  accumulate_warp_source_gradient(tape.warp_later, branch, src.d_i1);
  if (fg) accumulate_feature_gradient(*fg, src.d_i0, src.d_i1);
  return src;
}

AdapterGrad interpolate_backward(const SynthesisTape& tape, const AdapterParams& adapter,
                                 const Frame& dL_dframe) {
  AdapterGrad grad = AdapterGrad::zeros_like(adapter);
  interpolate_backward(tape, dL_dframe, grad);
  return grad;
}

}  // namespace vfi
