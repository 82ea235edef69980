#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vfi/adaptation.hpp"
#include "vfi/flow_estimator.hpp"
#include "vfi/synthetic.hpp"

namespace vfi {

// Velocity tiers at 128x128, px/frame upper bounds.
enum class VelocityTier { easy, medium, hard, extreme };
const char* to_string(VelocityTier t);
VelocityTier parse_tier(const std::string& s);
double tier_max_speed(VelocityTier t);

struct BenchEntry {
  std::string id;
  ScenePattern pattern;
  int width = 128;
  int height = 128;
  std::uint64_t seed = 0;
  VelocityTier tier = VelocityTier::easy;
};

// Text format, one item per line ('#' comments allowed):
//   bias=0.6
//   sequence id=s00 pattern=translate texture=sinusoid velocity=1.5,0 res=128x128 seed=7 tier=medium
// `velocity` is "vx,vy" for translate/multiblob/affine and rad/frame for
// rotate; affine also takes affine=a,b,c,d.
struct BenchSpec {
  std::vector<BenchEntry> sequences;
  double bias = 1.0;  // multiplicative flow bias gamma applied to estimates

  static BenchSpec parse(const std::string& text);
  static BenchSpec load(const std::filesystem::path& path);
  std::string to_text() const;
};

// 20 sequences at 128x128, five per velocity tier, fixed seeds.
BenchSpec default_bench(double bias = 0.6);

// A pattern whose fastest point moves about `speed` px/frame, drawn from `seed`.
ScenePattern make_pattern(MotionKind kind, TextureKind texture, double speed, int width,
                          int height, std::uint64_t seed);

struct CsvRow {
  std::string seq_id;
  Strategy strategy = Strategy::cycle;
  AdaptMode mode = AdaptMode::plugin;
  int step = 0;
  double loss = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double adapt_ms = 0.0;
  double infer_ms = 0.0;
  std::size_t n_params = 0;
};

std::string csv_header();
std::string to_csv_line(const CsvRow& row);
// Same as to_csv_line with the two timing columns blanked.
std::string to_csv_line_untimed(const CsvRow& row);

struct EvalOptions {
  EstimatorParams estimator;
  double bias = 1.0;
  std::optional<double> plugin_eta;
  std::optional<double> e2e_eta;
};

// Fresh identity adapter (plugin) or the given estimator (e2e), adapted for
// max(steps) updates; one row per requested step.
std::vector<CsvRow> evaluate_septuplet(const std::string& seq_id, const SeptupletView& seq,
                                       Strategy strategy, AdaptMode mode,
                                       const std::vector<int>& steps, const EvalOptions& options);

struct AblationTable {
  std::vector<CsvRow> rows;        // ordered by seq_id, strategy, mode, step
  std::vector<CsvRow> aggregates;  // seq_id "mean", per (strategy, mode, step)
  std::vector<std::string> errors;

  std::string to_csv() const;
  const CsvRow* aggregate(Strategy s, AdaptMode m, int step) const;
};

// Runs every sequence x strategy x mode on a worker pool of `threads`
// (0 = VFI_THREADS or hardware concurrency).
AblationTable ablate(const BenchSpec& bench, const std::vector<int>& steps,
                     const std::vector<Strategy>& strategies, const std::vector<AdaptMode>& modes,
                     const EvalOptions& options, unsigned threads = 0);

unsigned worker_count(unsigned requested);

}  // namespace vfi
