#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vfi/adapter.hpp"
#include "vfi/flow_estimator.hpp"
#include "vfi/imaging.hpp"
#include "vfi/synthesizer.hpp"

namespace vfi {

// Read access to the seven frames of a sequence. Index i sits at time i;
// even indices are model inputs and index 3 is the held-out target.
class SeptupletView {
 public:
  static constexpr std::size_t kFrames = 7;
  static constexpr std::size_t kHeldOut = 3;

  virtual ~SeptupletView() = default;
  virtual const Frame& frame(std::size_t index) const = 0;
};

class Septuplet final : public SeptupletView {
 public:
  explicit Septuplet(std::array<Frame, kFrames> frames);

  const Frame& frame(std::size_t index) const override;
  int width() const { return frames_[0].width(); }
  int height() const { return frames_[0].height(); }
  int channels() const { return frames_[0].channels(); }

 private:
  std::array<Frame, kFrames> frames_;
};

struct Triplet {
  std::array<std::size_t, 3> indices;  // first, target, last
};

// D1 = {I1, I3, I5} and D2 = {I3, I5, I7}, i.e. indices {0,2,4} and {2,4,6}.
struct TripletBatch {
  std::array<Triplet, 2> triplets;
};
TripletBatch make_triplets();

enum class Strategy { cycle, naive };
enum class AdaptMode { plugin, e2e };

const char* to_string(Strategy s);
const char* to_string(AdaptMode m);
Strategy parse_strategy(const std::string& s);
AdaptMode parse_adapt_mode(const std::string& s);

struct AdaptationConfig {
  Strategy strategy = Strategy::cycle;
  AdaptMode mode = AdaptMode::plugin;
  int steps = 10;
  std::optional<double> eta;  // unset selects the per-mode default below
  int eval_every = 1;  // 0 disables held-out evaluation

  static constexpr double kDefaultPluginEta = 1e4;
  static constexpr double kDefaultE2eEta = 1e4;

  double effective_eta() const;
  void validate() const;
};

struct StepRecord {
  int step = 0;
  double loss = 0.0;
  std::optional<double> psnr;
  std::optional<double> ssim;
};

struct AdaptationReport {
  std::vector<StepRecord> steps;
  std::size_t n_params = 0;
  double adapt_ms = 0.0;  // mean wall-clock per adaptation step
  double infer_ms = 0.0;  // wall-clock of one full uncached interpolation
  std::size_t updates = 0;
  bool aborted = false;
  std::string abort_reason;

  // step,loss,psnr,ssim rows, then a params,adapt_ms,infer_ms summary.
  std::string to_csv() const;
};

struct LossAndGrad {
  double loss = 0.0;
  AdapterGrad grad;
};

// Per-interpolation record of one strategy evaluation, for inspection and
// gradient checking.
struct StrategyTrace {
  std::vector<SynthesisTape> tapes;
  std::vector<Frame> residuals;  // prediction - target per supervised frame
};

// Cycle strategy: for each triplet (a, b, c), I_ab = Phi(a, b), I_bc = Phi(b, c),
// b_hat = Phi(I_ab, I_bc); loss = mean of the two L1 reconstruction errors.
double cycle_loss(const SeptupletView& seq, MotionSource& motion, const AdapterParams& adapter,
                  StrategyTrace* trace = nullptr);
LossAndGrad cycle_loss_step(const SeptupletView& seq, MotionSource& motion,
                            const AdapterParams& adapter);
LossAndGrad cycle_loss_step(const SeptupletView& seq, const EstimatorParams& est,
                            const AdapterParams& adapter);

// Naive strategy: I3 from (I1, I5) and I5 from (I3, I7), averaged.
double naive_loss(const SeptupletView& seq, MotionSource& motion, const AdapterParams& adapter,
                  StrategyTrace* trace = nullptr);
LossAndGrad naive_loss_step(const SeptupletView& seq, MotionSource& motion,
                            const AdapterParams& adapter);
LossAndGrad naive_loss_step(const SeptupletView& seq, const EstimatorParams& est,
                            const AdapterParams& adapter);

double strategy_loss(Strategy s, const SeptupletView& seq, MotionSource& motion,
                     const AdapterParams& adapter);
LossAndGrad strategy_step(Strategy s, const SeptupletView& seq, MotionSource& motion,
                          const AdapterParams& adapter);

// The held-out frame I4_hat = Phi(I3, I5) and its metrics against I4.
Interpolation predict_held_out(const SeptupletView& seq, MotionSource& motion,
                               const AdapterParams& adapter, bool reusable = true);
StepRecord evaluate_held_out(const SeptupletView& seq, MotionSource& motion,
                             const AdapterParams& adapter);

// Plugin-mode test-time adaptation: `steps` vanilla gradient-descent updates
// of `adapter` on the strategy loss. The adapter is not reset here.
AdaptationReport adapt(const SeptupletView& seq, MotionSource& motion, AdapterParams& adapter,
                       const AdaptationConfig& cfg);

struct E2eResult {
  EstimatorParams params;
  AdaptationReport report;
  bool clamped = false;  // lambda was driven below zero at some step
};

// End-to-end mode: tunes the estimator smoothness by central finite
// differences (step 1e-2 relative) with an identity adapter held fixed.
E2eResult e2e_adapt(const SeptupletView& seq, const EstimatorParams& est,
                    const AdaptationConfig& cfg, double bias = 1.0);

}  // namespace vfi
