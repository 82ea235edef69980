#include "vfi/adaptation.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string_view>

#include "vfi/config.hpp"
#include "vfi/metrics.hpp"

namespace vfi {

Septuplet::Septuplet(std::array<Frame, kFrames> frames) : frames_(std::move(frames)) {
  for (const Frame& f : frames_) {
    if (f.empty()) throw std::invalid_argument("septuplet: empty frame");
    if (!f.same_shape(frames_[0])) throw std::invalid_argument("septuplet: frame shapes differ");
  }
}

const Frame& Septuplet::frame(std::size_t index) const {
  if (index >= kFrames) throw std::out_of_range("septuplet frame index out of range");
  return frames_[index];
}

TripletBatch make_triplets() { return {{{{{0, 2, 4}}, {{2, 4, 6}}}}}; }

const char* to_string(Strategy s) { return s == Strategy::cycle ? "cycle" : "naive"; }
const char* to_string(AdaptMode m) { return m == AdaptMode::plugin ? "plugin" : "e2e"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "cycle") return Strategy::cycle;
  if (s == "naive") return Strategy::naive;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

AdaptMode parse_adapt_mode(const std::string& s) {
  if (s == "plugin") return AdaptMode::plugin;
  if (s == "e2e") return AdaptMode::e2e;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

double AdaptationConfig::effective_eta() const {
  if (eta) return *eta;
  return mode == AdaptMode::plugin ? kDefaultPluginEta : kDefaultE2eEta;
}

void AdaptationConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  const double e = effective_eta();
  if (!std::isfinite(e) || e < 0.0) throw std::invalid_argument("eta must be finite and >= 0");
  if (eval_every < 0) throw std::invalid_argument("eval_every must be >= 0");
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string optional_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

// Adds the L1 gradient of one supervised prediction, scaled by `weight`.
Frame weighted_l1_gradient(const Frame& prediction, const Frame& target, double weight) {
  Frame g = l1_loss_gradient(prediction, target);
  for (double& v : g.data()) v *= weight;
  return g;
}

Frame residual(const Frame& prediction, const Frame& target) {
  Frame r = prediction;
  auto d = r.data();
  const auto t = target.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= t[i];
  return r;
}

double run_cycle(const SeptupletView& seq, MotionSource& motion, const AdapterParams& adapter,
                 AdapterGrad* grad, StrategyTrace* trace) {
  const TripletBatch batch = make_triplets();
  const double weight = 1.0 / static_cast<double>(batch.triplets.size());
  double loss = 0.0;
  for (const Triplet& t : batch.triplets) {
    const auto [ia, ib, ic] = t.indices;
    const Frame& fa = seq.frame(ia);
    const Frame& fb = seq.frame(ib);
    const Frame& fc = seq.frame(ic);
    const auto ta = static_cast<double>(ia);
    const auto tb = static_cast<double>(ib);
    const auto tc = static_cast<double>(ic);

    Interpolation first = interpolate(fa, fb, motion, {ta, tb, true}, adapter);
    Interpolation second = interpolate(fb, fc, motion, {tb, tc, true}, adapter);
    Interpolation target = interpolate(first.frame, second.frame, motion,
                                       {0.5 * (ta + tb), 0.5 * (tb + tc), false}, adapter,
                                       /*propagate_to_sources=*/true);
    loss += weight * l1_loss(target.frame, fb);

    if (grad) {
      const auto src =
          interpolate_backward(target.tape, weighted_l1_gradient(target.frame, fb, weight), *grad);
      interpolate_backward(first.tape, src->d_i0, *grad);
      interpolate_backward(second.tape, src->d_i1, *grad);
    }
    if (trace) {
      trace->residuals.push_back(residual(target.frame, fb));
      trace->tapes.push_back(std::move(first.tape));
      trace->tapes.push_back(std::move(second.tape));
      trace->tapes.push_back(std::move(target.tape));
    }
  }
  return loss;
}

double run_naive(const SeptupletView& seq, MotionSource& motion, const AdapterParams& adapter,
                 AdapterGrad* grad, StrategyTrace* trace) {
  const TripletBatch batch = make_triplets();
  const double weight = 1.0 / static_cast<double>(batch.triplets.size());
  double loss = 0.0;
  for (const Triplet& t : batch.triplets) {
    const auto [ia, ib, ic] = t.indices;
    const Frame& target = seq.frame(ib);
    Interpolation pred = interpolate(seq.frame(ia), seq.frame(ic), motion,
                                     {static_cast<double>(ia), static_cast<double>(ic), true},
                                     adapter);
    loss += weight * l1_loss(pred.frame, target);
    if (grad) interpolate_backward(pred.tape, weighted_l1_gradient(pred.frame, target, weight), *grad);
    if (trace) {
      trace->residuals.push_back(residual(pred.frame, target));
      trace->tapes.push_back(std::move(pred.tape));
    }
  }
  return loss;
}

}  // namespace

double cycle_loss(const SeptupletView& seq, MotionSource& motion, const AdapterParams& adapter,
                  StrategyTrace* trace) {
  return run_cycle(seq, motion, adapter, nullptr, trace);
}

LossAndGrad cycle_loss_step(const SeptupletView& seq, MotionSource& motion,
                            const AdapterParams& adapter) {
  LossAndGrad out{0.0, AdapterGrad::zeros_like(adapter)};
  out.loss = run_cycle(seq, motion, adapter, &out.grad, nullptr);
  return out;
}

LossAndGrad cycle_loss_step(const SeptupletView& seq, const EstimatorParams& est,
                            const AdapterParams& adapter) {
  EstimatorMotion motion(est);
  return cycle_loss_step(seq, motion, adapter);
}

double naive_loss(const SeptupletView& seq, MotionSource& motion, const AdapterParams& adapter,
                  StrategyTrace* trace) {
  return run_naive(seq, motion, adapter, nullptr, trace);
}

LossAndGrad naive_loss_step(const SeptupletView& seq, MotionSource& motion,
                            const AdapterParams& adapter) {
  LossAndGrad out{0.0, AdapterGrad::zeros_like(adapter)};
  out.loss = run_naive(seq, motion, adapter, &out.grad, nullptr);
  return out;
}

LossAndGrad naive_loss_step(const SeptupletView& seq, const EstimatorParams& est,
                            const AdapterParams& adapter) {
  EstimatorMotion motion(est);
  return naive_loss_step(seq, motion, adapter);
}

double strategy_loss(Strategy s, const SeptupletView& seq, MotionSource& motion,
                     const AdapterParams& adapter) {
  return s == Strategy::cycle ? cycle_loss(seq, motion, adapter) : naive_loss(seq, motion, adapter);
}

LossAndGrad strategy_step(Strategy s, const SeptupletView& seq, MotionSource& motion,
                          const AdapterParams& adapter) {
  return s == Strategy::cycle ? cycle_loss_step(seq, motion, adapter)
                              : naive_loss_step(seq, motion, adapter);
}

Interpolation predict_held_out(const SeptupletView& seq, MotionSource& motion,
                               const AdapterParams& adapter, bool reusable) {
  return interpolate(seq.frame(2), seq.frame(4), motion, {2.0, 4.0, reusable}, adapter);
}

StepRecord evaluate_held_out(const SeptupletView& seq, MotionSource& motion,
                             const AdapterParams& adapter) {
  const Interpolation pred = predict_held_out(seq, motion, adapter);
  const Frame& truth = seq.frame(SeptupletView::kHeldOut);
  StepRecord r;
  r.psnr = psnr(pred.frame, truth);
  r.ssim = ssim(pred.frame, truth);
  return r;
}

namespace {

bool evaluation_due(const AdaptationConfig& cfg, int step) {
  return cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.steps);
}

}  // namespace

AdaptationReport adapt(const SeptupletView& seq, MotionSource& motion, AdapterParams& adapter,
                       const AdaptationConfig& cfg) {
  cfg.validate();
  if (cfg.mode != AdaptMode::plugin) throw std::invalid_argument("adapt: plugin mode required");
  const double eta = cfg.effective_eta();
  CachedMotion cached(motion);

  AdaptationReport report;
  report.n_params = adapter.parameter_count();
  double adapt_total_ms = 0.0;

  for (int step = 0; step <= cfg.steps; ++step) {
    const bool update = step < cfg.steps;
    const auto start = Clock::now();
    std::optional<LossAndGrad> lg;
    double loss = std::numeric_limits<double>::quiet_NaN();
    try {
      if (update) {
        lg = strategy_step(cfg.strategy, seq, cached, adapter);
        loss = lg->loss;
      } else {
        loss = strategy_loss(cfg.strategy, seq, cached, adapter);
      }
    } catch (const std::invalid_argument& e) {
      // NaN input reaching the warp.
      if (std::string_view(e.what()).find("non-finite") == std::string_view::npos) throw;
    }
    const double loss_ms = elapsed_ms(start);
    if (!std::isfinite(loss)) {
      report.aborted = true;
      report.abort_reason = "non-finite loss at step " + std::to_string(step);
      break;
    }

    StepRecord rec;
    if (evaluation_due(cfg, step)) rec = evaluate_held_out(seq, cached, adapter);
    rec.step = step;
    rec.loss = loss;
    report.steps.push_back(rec);

    if (update) {
      const auto update_start = Clock::now();
      try {
        sgd_step(adapter, lg->grad, eta);
      } catch (const std::domain_error& e) {
        report.aborted = true;
        report.abort_reason = e.what();
        break;
      }
      ++report.updates;
      // Held-out evaluation is not part of the step time.
      adapt_total_ms += loss_ms + elapsed_ms(update_start);
    }
  }
  if (report.updates > 0) report.adapt_ms = adapt_total_ms / static_cast<double>(report.updates);

  const auto infer_start = Clock::now();
  try {
    predict_held_out(seq, motion, adapter, false);
    report.infer_ms = elapsed_ms(infer_start);
  } catch (const std::invalid_argument&) {
    if (!report.aborted) throw;
  }
  return report;
}

E2eResult e2e_adapt(const SeptupletView& seq, const EstimatorParams& est,
                    const AdaptationConfig& cfg, double bias) {
  cfg.validate();
  est.validate();
  if (cfg.mode != AdaptMode::e2e) throw std::invalid_argument("e2e_adapt: e2e mode required");
  const double eta = cfg.effective_eta();
  const Frame& first = seq.frame(0);
  const AdapterParams identity = init_identity(first.height(), first.width(), AdapterMode::direct);

  E2eResult result{est, {}, false};
  AdaptationReport& report = result.report;
  report.n_params = 1;

  const auto loss_at = [&](double smoothness) {
    EstimatorParams p = result.params;
    p.smoothness = smoothness;
    EstimatorMotion motion(p, bias);
    CachedMotion cached(motion);
    return strategy_loss(cfg.strategy, seq, cached, identity);
  };

  double adapt_total_ms = 0.0;
  for (int step = 0; step <= cfg.steps; ++step) {
    const auto start = Clock::now();
    const double loss = loss_at(result.params.smoothness);
    double step_ms = elapsed_ms(start);
    if (!std::isfinite(loss)) {
      report.aborted = true;
      report.abort_reason = "non-finite loss at step " + std::to_string(step);
      break;
    }
    StepRecord rec;
    if (evaluation_due(cfg, step)) {
      EstimatorMotion motion(result.params, bias);
      rec = evaluate_held_out(seq, motion, identity);
    }
    rec.step = step;
    rec.loss = loss;
    report.steps.push_back(rec);
    if (step == cfg.steps) break;

    const auto fd_start = Clock::now();
    const double lambda = result.params.smoothness;
    const double h = 1e-2 * std::max(lambda, 1e-6);
    const double gradient = (loss_at(lambda + h) - loss_at(lambda - h)) / (2.0 * h);
    if (!std::isfinite(gradient)) {
      report.aborted = true;
      report.abort_reason = "non-finite gradient at step " + std::to_string(step);
      break;
    }
    double next = lambda - eta * gradient;
    if (next < 0.0) {
      next = 1e-6;
      result.clamped = true;
    }
    result.params.smoothness = next;
    ++report.updates;
    step_ms += elapsed_ms(fd_start);
    adapt_total_ms += step_ms;
  }
  if (report.updates > 0) report.adapt_ms = adapt_total_ms / static_cast<double>(report.updates);

  const auto infer_start = Clock::now();
  EstimatorMotion motion(result.params, bias);
  predict_held_out(seq, motion, identity, false);
  report.infer_ms = elapsed_ms(infer_start);
  return result;
}

std::string AdaptationReport::to_csv() const {
  std::string out = "step,loss,psnr,ssim\n";
  for (const StepRecord& r : steps) {
    out += std::to_string(r.step) + "," + format_double(r.loss) + "," + optional_field(r.psnr) +
           "," + optional_field(r.ssim) + "\n";
  }
  out += "params,adapt_ms,infer_ms\n";
  out += std::to_string(n_params) + "," + format_double(adapt_ms) + "," + format_double(infer_ms) +
         "\n";
  return out;
}

}  // namespace vfi
