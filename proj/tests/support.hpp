#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vfi/adaptation.hpp"
#include "vfi/adapter.hpp"
#include "vfi/flow_estimator.hpp"
#include "vfi/imaging.hpp"
#include "vfi/synthesizer.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline vfi::Frame random_frame(Rng& rng, int w, int h, int c = 3) {
  vfi::Frame f(w, h, c);
  for (double& v : f.data()) v = uniform(rng, 0.0, 1.0);
  return f;
}

// Blurred noise in a mid-grey band: enough texture for the estimator, far from
// the [0,1] limits.
inline vfi::Frame smooth_frame(Rng& rng, int w, int h, int c = 3) {
  vfi::Frame f = vfi::gaussian_blur5(vfi::gaussian_blur5(random_frame(rng, w, h, c)));
  for (double& v : f.data()) v = 0.2 + 0.6 * v;
  return f;
}

inline vfi::FlowField random_flow(Rng& rng, int w, int h, double mag) {
  vfi::FlowField f(w, h);
  for (double& v : f.u()) v = uniform(rng, -mag, mag);
  for (double& v : f.v()) v = uniform(rng, -mag, mag);
  return f;
}

inline vfi::Septuplet random_septuplet(Rng& rng, int w, int h, int c = 3) {
  std::array<vfi::Frame, 7> frames;
  for (auto& f : frames) f = smooth_frame(rng, w, h, c);
  return vfi::Septuplet(std::move(frames));
}

inline vfi::Septuplet constant_septuplet(const vfi::Frame& f) {
  std::array<vfi::Frame, 7> frames;
  frames.fill(f);
  return vfi::Septuplet(std::move(frames));
}

// Direct-mode adapter jittered away from identity.
inline vfi::AdapterParams random_adapter(Rng& rng, int h, int w, double alpha_jitter = 0.3,
                                         double beta_jitter = 0.4) {
  vfi::AdapterParams p = vfi::init_identity(h, w, vfi::AdapterMode::direct);
  for (auto d : {vfi::WarpDirection::toward_earlier, vfi::WarpDirection::toward_later}) {
    for (std::size_t i = 0; i < p.pixel_count(); ++i) {
      p.alpha(d, i) += uniform(rng, -alpha_jitter, alpha_jitter);
      p.beta_u(d, i) += uniform(rng, -beta_jitter, beta_jitter);
      p.beta_v(d, i) += uniform(rng, -beta_jitter, beta_jitter);
    }
  }
  return p;
}

inline vfi::AdapterParams random_feature_adapter(Rng& rng, int h, int w, double jitter = 0.2) {
  vfi::AdapterParams p = vfi::init_identity(h, w, vfi::AdapterMode::feature_conditioned);
  for (double& v : p.values()) v += uniform(rng, -jitter, jitter);
  return p;
}

// Estimator settings that fit 8..16 px frames.
inline vfi::EstimatorParams small_estimator() {
  vfi::EstimatorParams p;
  p.levels = 2;
  p.iters_per_level = 20;
  return p;
}

// Counts frame reads per index.
class TrackingSeptuplet final : public vfi::SeptupletView {
 public:
  explicit TrackingSeptuplet(const vfi::SeptupletView& inner) : inner_(inner) {}
  const vfi::Frame& frame(std::size_t index) const override {
    ++reads_.at(index);
    return inner_.frame(index);
  }
  int reads(std::size_t index) const { return reads_.at(index); }
  void reset() const { reads_.fill(0); }

 private:
  const vfi::SeptupletView& inner_;
  mutable std::array<int, 7> reads_{};
};

// The interpolation pipeline written without any adapter code.
inline vfi::Frame reference_interpolate(const vfi::Frame& i0, const vfi::Frame& i1,
                                        const vfi::EstimatorParams& est) {
  const vfi::FlowField f01 = vfi::estimate_flow(i0, i1, est);
  const vfi::FlowField f10 = vfi::estimate_flow(i1, i0, est);
  const vfi::IntermediateFlows mid = vfi::intermediate_flows(f01, f10, 0.5);
  const vfi::Frame w0 = vfi::warp_frame(i0, mid.to_earlier);
  const vfi::Frame w1 = vfi::warp_frame(i1, mid.to_later);
  vfi::Frame out(i0.width(), i0.height(), i0.channels());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out.data()[k] = 0.5 * w0.data()[k] + 0.5 * w1.data()[k];
  }
  out.clamp_unit();
  return out;
}

// Everything that marks a non-differentiable point of the loss: bilinear
// cells, edge clamps, output saturation and the sign of every residual.
inline std::vector<std::int64_t> kink_signature(const vfi::StrategyTrace& trace) {
  std::vector<std::int64_t> sig;
  const auto taps = [&](const vfi::SampleJacobian& jac) {
    for (const auto& t : jac.taps) {
      sig.push_back(t.cell_x);
      sig.push_back(t.cell_y);
      sig.push_back(t.clamped_x * 2 + t.clamped_y);
    }
  };
  for (const auto& tape : trace.tapes) {
    taps(tape.warp_earlier);
    taps(tape.warp_later);
    for (unsigned char s : tape.saturated) sig.push_back(s);
  }
  for (const auto& r : trace.residuals) {
    for (double v : r.data()) sig.push_back(v > 0 ? 1 : (v < 0 ? -1 : 0));
  }
  return sig;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a kink
};

// Central differences of the strategy loss over every adapter parameter with
// all motion pinned. The relative error uses max(|analytic|, |numeric|) with a
// small absolute floor for parameters that barely touch the loss.
inline GradientCheck check_strategy_gradient(vfi::Strategy strategy, const vfi::SeptupletView& seq,
                                             vfi::MotionSource& frozen,
                                             const vfi::AdapterParams& adapter,
                                             double eps = 1e-4, double floor = 1e-8) {
  const auto loss = [&](const vfi::AdapterParams& p, vfi::StrategyTrace* trace) {
    return strategy == vfi::Strategy::cycle ? vfi::cycle_loss(seq, frozen, p, trace)
                                            : vfi::naive_loss(seq, frozen, p, trace);
  };
  vfi::StrategyTrace base_trace;
  loss(adapter, &base_trace);
  const auto base_sig = kink_signature(base_trace);
  const vfi::AdapterGrad analytic = vfi::strategy_step(strategy, seq, frozen, adapter).grad;

  GradientCheck out;
  vfi::AdapterParams p = adapter;
  for (std::size_t i = 0; i < p.parameter_count(); ++i) {
    const double keep = p.values()[i];
    vfi::StrategyTrace plus_trace;
    vfi::StrategyTrace minus_trace;
    p.values()[i] = keep + eps;
    const double lp = loss(p, &plus_trace);
    p.values()[i] = keep - eps;
    const double lm = loss(p, &minus_trace);
    p.values()[i] = keep;
    if (kink_signature(plus_trace) != base_sig || kink_signature(minus_trace) != base_sig) {
      ++out.skipped;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic.values()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
    ++out.checked;
  }
  return out;
}

}  // namespace testing
