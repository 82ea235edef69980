#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vfi/adaptation.hpp"
#include "vfi/adapter.hpp"
#include "vfi/bench.hpp"
#include "vfi/config.hpp"
#include "vfi/image_io.hpp"
#include "vfi/synthetic.hpp"

namespace fs = std::filesystem;
using namespace vfi;

namespace {

struct Settings {
  EstimatorParams estimator;
  double bias = 1.0;
  std::optional<double> plugin_eta;
  std::optional<double> e2e_eta;
};

Settings load_settings(const std::string& path) {
  Settings s;
  if (path.empty()) return s;
  const KeyValueConfig cfg = KeyValueConfig::load(path);
  s.estimator = EstimatorParams::from_config(cfg);
  s.bias = cfg.get_double("bias", 1.0);
  if (cfg.contains("plugin_eta")) s.plugin_eta = cfg.get_double("plugin_eta", 0.0);
  if (cfg.contains("e2e_eta")) s.e2e_eta = cfg.get_double("e2e_eta", 0.0);
  if (!(s.bias > 0.0 && s.bias <= 1.0)) throw std::invalid_argument("bias must be in (0,1]");
  return s;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

Vec2 parse_velocity(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) return {parse_double(s), 0.0};
  return {parse_double(s.substr(0, comma)), parse_double(s.substr(comma + 1))};
}

template <typename T, typename F>
std::vector<T> parse_csv_list(const std::string& s, F parse) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frame interpolation with test-time flow adaptation"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value settings file")->check(CLI::ExistingFile);

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic septuplet with oracle data");
  std::string pattern = "translate", texture = "sinusoid", velocity = "2,0", res = "128x128", out_dir;
  std::uint64_t seed = 0;
  double affine_scale = 0.0;
  synth->add_option("--pattern", pattern, "translate|rotate|affine|multiblob")->required();
  synth->add_option("--velocity", velocity, "vx,vy px/frame, or rad/frame for rotate");
  synth->add_option("--texture", texture, "gaussian_blobs|sinusoid|value_noise");
  synth->add_option("--res", res, "WxH");
  synth->add_option("--seed", seed);
  synth->add_option("--affine-rate", affine_scale, "isotropic zoom rate per frame (affine)");
  synth->add_option("--out", out_dir)->required();

  // interpolate
  auto* interp = app.add_subcommand("interpolate", "synthesize the middle frame from frames 3 and 5");
  std::string seq_dir, out_path, adapter_path, dump_dir;
  interp->add_option("--seq", seq_dir)->required();
  interp->add_option("--out", out_path)->required();
  interp->add_option("--adapter", adapter_path);
  interp->add_option("--dump-flow", dump_dir);

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "test-time adaptation on one sequence");
  std::string strategy = "cycle", mode = "plugin", report_path, save_adapter;
  int steps = 10;
  std::optional<double> eta;
  adapt_cmd->add_option("--seq", seq_dir)->required();
  adapt_cmd->add_option("--strategy", strategy)->check(CLI::IsMember({"cycle", "naive"}));
  adapt_cmd->add_option("--mode", mode)->check(CLI::IsMember({"plugin", "e2e"}));
  adapt_cmd->add_option("--steps", steps)->check(CLI::NonNegativeNumber);
  adapt_cmd->add_option("--eta", eta);
  adapt_cmd->add_option("--report", report_path);
  adapt_cmd->add_option("--save-adapter", save_adapter);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "frozen-baseline metrics on the held-out frame");
  eval_cmd->add_option("--seq", seq_dir)->required();
  eval_cmd->add_option("--report", report_path);
  eval_cmd->add_option("--adapter", adapter_path);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "strategy x mode x step table over a bench");
  std::string bench_path, steps_list = "0,5,10,20,30", strategies = "cycle,naive", modes = "plugin,e2e";
  unsigned threads = 0;
  ablate_cmd->add_option("--bench", bench_path, "bench spec file, or 'default'")->required();
  ablate_cmd->add_option("--steps", steps_list);
  ablate_cmd->add_option("--strategies", strategies);
  ablate_cmd->add_option("--modes", modes);
  ablate_cmd->add_option("--threads", threads, "0 = VFI_THREADS or all cores");
  ablate_cmd->add_option("--out", out_path);

  CLI11_PARSE(app, argc, argv);

  try {
    const Settings settings = load_settings(config_path);

    if (*synth) {
      const auto x = res.find('x');
      if (x == std::string::npos) throw std::invalid_argument("--res must be WxH");
      const int w = parse_int(res.substr(0, x));
      const int h = parse_int(res.substr(x + 1));
      ScenePattern p;
      p.kind = parse_motion_kind(pattern);
      p.texture = parse_texture_kind(texture);
      if (p.kind == MotionKind::rotate) {
        p.angular_rate = parse_double(velocity);
      } else {
        p.velocity = parse_velocity(velocity);
      }
      if (p.kind == MotionKind::affine) p.affine_rate = {affine_scale, 0.0, 0.0, affine_scale};
      const SyntheticScene scene(p, w, h, seed);
      write_sequence_dir(scene, out_dir);
      return 0;
    }

    if (*interp) {
      const Septuplet seq = load_sequence_dir(seq_dir);
      const AdapterParams adapter = adapter_path.empty()
                                        ? init_identity(seq.height(), seq.width(), AdapterMode::direct)
                                        : read_adapter(adapter_path);
      EstimatorMotion motion(settings.estimator, settings.bias);
      const Interpolation result = predict_held_out(seq, motion, adapter, false);
      save_frame(result.frame, out_path);
      if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        write_flo(result.adapted_earlier, fs::path(dump_dir) / "flow_mid_to_earlier.flo");
        write_flo(result.adapted_later, fs::path(dump_dir) / "flow_mid_to_later.flo");
      }
      return 0;
    }

    if (*adapt_cmd) {
      const Septuplet seq = load_sequence_dir(seq_dir);
      AdaptationConfig cfg;
      cfg.strategy = parse_strategy(strategy);
      cfg.mode = parse_adapt_mode(mode);
      cfg.steps = steps;
      cfg.eta = eta ? eta : (cfg.mode == AdaptMode::plugin ? settings.plugin_eta : settings.e2e_eta);
      AdaptationReport report;
      if (cfg.mode == AdaptMode::plugin) {
        AdapterParams adapter = init_identity(seq.height(), seq.width(), AdapterMode::direct);
        EstimatorMotion motion(settings.estimator, settings.bias);
        report = adapt(seq, motion, adapter, cfg);
        if (!save_adapter.empty()) write_adapter(adapter, save_adapter);
      } else {
        if (!save_adapter.empty()) throw std::invalid_argument("--save-adapter needs plugin mode");
        const E2eResult r = e2e_adapt(seq, settings.estimator, cfg, settings.bias);
        report = r.report;
        std::cerr << "smoothness " << format_double(r.params.smoothness)
                  << (r.clamped ? " (clamped)" : "") << "\n";
      }
      write_text(report_path, report.to_csv());
      if (report.aborted) {
        std::cerr << "adaptation aborted: " << report.abort_reason << "\n";
        return 2;
      }
      return 0;
    }

    if (*eval_cmd) {
      const Septuplet seq = load_sequence_dir(seq_dir);
      AdapterParams adapter = adapter_path.empty()
                                        ? init_identity(seq.height(), seq.width(), AdapterMode::direct)
                                        : read_adapter(adapter_path);
      EstimatorMotion motion(settings.estimator, settings.bias);
      AdaptationConfig cfg;
      cfg.steps = 0;
      const AdaptationReport report = adapt(seq, motion, adapter, cfg);
      write_text(report_path, report.to_csv());
      return 0;
    }

    if (*ablate_cmd) {
      const BenchSpec bench = bench_path == "default" ? default_bench() : BenchSpec::load(bench_path);
      const auto step_values = parse_csv_list<int>(steps_list, [](const std::string& s) { return parse_int(s); });
      const auto strategy_values = parse_csv_list<Strategy>(strategies, parse_strategy);
      const auto mode_values = parse_csv_list<AdaptMode>(modes, parse_adapt_mode);
      EvalOptions options;
      options.estimator = settings.estimator;
      options.plugin_eta = settings.plugin_eta;
      options.e2e_eta = settings.e2e_eta;
      const AblationTable table = ablate(bench, step_values, strategy_values, mode_values, options, threads);
      write_text(out_path, table.to_csv());
      for (const auto& e : table.errors) std::cerr << "error: " << e << "\n";
      return table.errors.empty() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
