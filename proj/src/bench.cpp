#include "vfi/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "vfi/config.hpp"

namespace vfi {

const char* to_string(VelocityTier t) {
  switch (t) {
    case VelocityTier::easy: return "easy";
    case VelocityTier::medium: return "medium";
    case VelocityTier::hard: return "hard";
    case VelocityTier::extreme: return "extreme";
  }
  return "?";
}

VelocityTier parse_tier(const std::string& s) {
  if (s == "easy") return VelocityTier::easy;
  if (s == "medium") return VelocityTier::medium;
  if (s == "hard") return VelocityTier::hard;
  if (s == "extreme") return VelocityTier::extreme;
  throw std::invalid_argument("unknown velocity tier: " + s);
}

double tier_max_speed(VelocityTier t) {
  switch (t) {
    case VelocityTier::easy: return 1.0;
    case VelocityTier::medium: return 2.0;
    case VelocityTier::hard: return 4.0;
    case VelocityTier::extreme: return 8.0;
  }
  return 0.0;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

BenchEntry parse_entry(const std::string& rest, int line_no) {
  BenchEntry e;
  bool has_pattern = false;
  bool has_tier = false;
  std::stringstream ss(rest);
  std::string tok;
  std::vector<double> velocity;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("bench line " + std::to_string(line_no) + ": expected key=value, got " + tok);
    }
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    if (key == "id") {
      e.id = value;
    } else if (key == "pattern") {
      e.pattern.kind = parse_motion_kind(value);
      has_pattern = true;
    } else if (key == "texture") {
      e.pattern.texture = parse_texture_kind(value);
    } else if (key == "velocity") {
      velocity = parse_list(value);
    } else if (key == "affine") {
      const auto a = parse_list(value);
      if (a.size() != 4) throw std::invalid_argument("affine needs four values");
      std::copy(a.begin(), a.end(), e.pattern.affine_rate.begin());
    } else if (key == "res") {
      const auto x = value.find('x');
      if (x == std::string::npos) throw std::invalid_argument("res must be WxH");
      e.width = parse_int(value.substr(0, x));
      e.height = parse_int(value.substr(x + 1));
    } else if (key == "seed") {
      e.seed = std::stoull(value);
    } else if (key == "tier") {
      e.tier = parse_tier(value);
      has_tier = true;
    } else {
      throw std::invalid_argument("bench line " + std::to_string(line_no) + ": unknown key " + key);
    }
  }
  if (e.id.empty() || !has_pattern) {
    throw std::invalid_argument("bench line " + std::to_string(line_no) + ": id and pattern are required");
  }
  if (e.pattern.kind == MotionKind::rotate) {
    if (velocity.size() != 1) throw std::invalid_argument("rotate velocity is one rad/frame value");
    e.pattern.angular_rate = velocity[0];
  } else if (!velocity.empty()) {
    if (velocity.size() != 2) throw std::invalid_argument("velocity must be vx,vy");
    e.pattern.velocity = {velocity[0], velocity[1]};
  }
  e.pattern.validate(e.width, e.height);
  if (!has_tier) {
    const double m = e.pattern.max_displacement_per_frame(e.width, e.height);
    e.tier = m <= 1.0 ? VelocityTier::easy
             : m <= 2.0 ? VelocityTier::medium
             : m <= 4.0 ? VelocityTier::hard
                        : VelocityTier::extreme;
  }
  return e;
}

}  // namespace

BenchSpec BenchSpec::parse(const std::string& text) {
  BenchSpec spec;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("sequence", 0) == 0) {
      spec.sequences.push_back(parse_entry(line.substr(8), line_no));
    } else if (line.rfind("bias", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("bias line needs '='");
      spec.bias = parse_double(trim(line.substr(eq + 1)));
    } else {
      throw std::invalid_argument("bench line " + std::to_string(line_no) + ": unrecognised");
    }
  }
  if (!(spec.bias > 0.0 && spec.bias <= 1.0)) throw std::invalid_argument("bias must be in (0,1]");
  std::map<std::string, int> seen;
  for (const auto& e : spec.sequences) {
    if (seen[e.id]++) throw std::invalid_argument("duplicate sequence id: " + e.id);
  }
  return spec;
}

BenchSpec BenchSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bench spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string BenchSpec::to_text() const {
  std::string out = "bias=" + format_double(bias) + "\n";
  for (const auto& e : sequences) {
    const ScenePattern& p = e.pattern;
    out += "sequence id=" + e.id + " pattern=" + to_string(p.kind) + " texture=" + to_string(p.texture);
    if (p.kind == MotionKind::rotate) {
      out += " velocity=" + format_double(p.angular_rate);
    } else {
      out += " velocity=" + join({p.velocity.x, p.velocity.y});
    }
    if (p.kind == MotionKind::affine) {
      out += " affine=" + join({p.affine_rate.begin(), p.affine_rate.end()});
    }
    out += " res=" + std::to_string(e.width) + "x" + std::to_string(e.height) +
           " seed=" + std::to_string(e.seed) + " tier=" + to_string(e.tier) + "\n";
  }
  return out;
}

ScenePattern make_pattern(MotionKind kind, TextureKind texture, double speed, int width, int height,
                          std::uint64_t seed) {
  ScenePattern p;
  p.kind = kind;
  p.texture = texture;
  // Golden-angle direction from the seed.
  const double angle = std::fmod(static_cast<double>(seed) * 2.399963229728653, 2.0 * M_PI);
  const Vec2 dir{std::cos(angle), std::sin(angle)};
  const double radius = 0.5 * std::hypot(width, height);
  switch (kind) {
    case MotionKind::translate:
    case MotionKind::multiblob:
      p.velocity = {speed * dir.x, speed * dir.y};
      break;
    case MotionKind::rotate:
      p.angular_rate = (seed % 2 ? -1.0 : 1.0) * speed / radius;
      break;
    case MotionKind::affine: {
      // Half drift, half zoom/rotation.
      p.velocity = {0.5 * speed * dir.x, 0.5 * speed * dir.y};
      const double k = 0.5 * speed / radius / std::sqrt(2.0);
      p.affine_rate = {k * dir.x, k * dir.y, -k * dir.y, k * dir.x};
      break;
    }
  }
  return p;
}

BenchSpec default_bench(double bias) {
  BenchSpec spec;
  spec.bias = bias;
  const MotionKind kinds[] = {MotionKind::translate, MotionKind::rotate, MotionKind::affine,
                              MotionKind::multiblob, MotionKind::translate};
  const TextureKind textures[] = {TextureKind::sinusoid, TextureKind::value_noise,
                                  TextureKind::gaussian_blobs};
  const VelocityTier tiers[] = {VelocityTier::easy, VelocityTier::medium, VelocityTier::hard,
                                VelocityTier::extreme};
  int index = 0;
  for (VelocityTier tier : tiers) {
    const double hi = tier_max_speed(tier);
    for (int j = 0; j < 5; ++j, ++index) {
      BenchEntry e;
      char id[16];
      std::snprintf(id, sizeof id, "s%02d", index);
      e.id = id;
      e.seed = 1000 + 17 * static_cast<std::uint64_t>(index);
      e.tier = tier;
      const double speed = hi * (0.6 + 0.075 * j);  // inside (hi/2, hi]
      e.pattern = make_pattern(kinds[j], textures[index % 3], speed, e.width, e.height, e.seed);
      spec.sequences.push_back(e);
    }
  }
  return spec;
}

std::string csv_header() {
  return "seq_id,strategy,mode,step,loss,psnr,ssim,adapt_ms,infer_ms,n_params";
}

namespace {

std::string csv_line(const CsvRow& r, bool timed) {
  std::string out = r.seq_id + "," + to_string(r.strategy) + "," + to_string(r.mode) + "," +
                    std::to_string(r.step) + "," + format_double(r.loss) + "," +
                    format_double(r.psnr) + "," + format_double(r.ssim) + ",";
  if (timed) out += format_double(r.adapt_ms) + "," + format_double(r.infer_ms);
  else out += ",";
  out += "," + std::to_string(r.n_params);
  return out;
}

}  // namespace

std::string to_csv_line(const CsvRow& row) { return csv_line(row, true); }
std::string to_csv_line_untimed(const CsvRow& row) { return csv_line(row, false); }

std::vector<CsvRow> evaluate_septuplet(const std::string& seq_id, const SeptupletView& seq,
                                       Strategy strategy, AdaptMode mode,
                                       const std::vector<int>& steps, const EvalOptions& options) {
  if (steps.empty()) throw std::invalid_argument("evaluate_septuplet: empty step list");
  for (int s : steps) {
    if (s < 0) throw std::invalid_argument("evaluate_septuplet: negative step");
  }
  AdaptationConfig cfg;
  cfg.strategy = strategy;
  cfg.mode = mode;
  cfg.steps = *std::max_element(steps.begin(), steps.end());
  cfg.eta = mode == AdaptMode::plugin ? options.plugin_eta : options.e2e_eta;
  int g = 0;
  for (int s : steps) g = std::gcd(g, s);
  cfg.eval_every = g > 0 ? g : 1;

  AdaptationReport report;
  if (mode == AdaptMode::plugin) {
    const Frame& f = seq.frame(0);
    AdapterParams adapter = init_identity(f.height(), f.width(), AdapterMode::direct);
    EstimatorMotion motion(options.estimator, options.bias);
    report = adapt(seq, motion, adapter, cfg);
  } else {
    report = e2e_adapt(seq, options.estimator, cfg, options.bias).report;
  }

  std::vector<CsvRow> rows;
  std::vector<int> sorted = steps;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int s : sorted) {
    const auto it = std::find_if(report.steps.begin(), report.steps.end(),
                                 [s](const StepRecord& r) { return r.step == s; });
    if (it == report.steps.end() || !it->psnr) {
      throw std::runtime_error(seq_id + ": adaptation stopped before step " + std::to_string(s) +
                               (report.aborted ? " (" + report.abort_reason + ")" : ""));
    }
    CsvRow row;
    row.seq_id = seq_id;
    row.strategy = strategy;
    row.mode = mode;
    row.step = s;
    row.loss = it->loss;
    row.psnr = *it->psnr;
    row.ssim = *it->ssim;
    row.adapt_ms = report.adapt_ms;
    row.infer_ms = report.infer_ms;
    row.n_params = report.n_params;
    rows.push_back(row);
  }
  return rows;
}

unsigned worker_count(unsigned requested) {
  unsigned n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("VFI_THREADS")) {
      try {
        const int cap = parse_int(env);
        if (cap > 0) n = std::min(n, static_cast<unsigned>(cap));
      } catch (const std::exception&) {
        throw std::invalid_argument(std::string("VFI_THREADS is not an integer: ") + env);
      }
    }
  }
  return std::max(1u, n);
}

std::string AblationTable::to_csv() const {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += to_csv_line(r) + "\n";
  for (const auto& r : aggregates) out += to_csv_line(r) + "\n";
  return out;
}

const CsvRow* AblationTable::aggregate(Strategy s, AdaptMode m, int step) const {
  for (const auto& r : aggregates) {
    if (r.strategy == s && r.mode == m && r.step == step) return &r;
  }
  return nullptr;
}

AblationTable ablate(const BenchSpec& bench, const std::vector<int>& steps,
                     const std::vector<Strategy>& strategies, const std::vector<AdaptMode>& modes,
                     const EvalOptions& options, unsigned threads) {
  if (bench.sequences.empty() || steps.empty() || strategies.empty() || modes.empty()) {
    throw std::invalid_argument("ablate: sequences, steps, strategies and modes must be non-empty");
  }
  std::vector<const BenchEntry*> entries;
  for (const auto& e : bench.sequences) entries.push_back(&e);
  std::stable_sort(entries.begin(), entries.end(),
                   [](const BenchEntry* a, const BenchEntry* b) { return a->id < b->id; });

  struct Job {
    std::size_t entry;
    Strategy strategy;
    AdaptMode mode;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    for (Strategy s : strategies) {
      for (AdaptMode m : modes) jobs.push_back({i, s, m});
    }
  }

  EvalOptions opts = options;
  opts.bias = bench.bias;
  std::vector<std::vector<CsvRow>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  // Scenes are rendered per job; rendering is cheap next to adaptation.
  const auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size() || failed.load()) return;
      const Job& job = jobs[j];
      const BenchEntry& e = *entries[job.entry];
      try {
        const SyntheticScene scene(e.pattern, e.width, e.height, e.seed);
        const Septuplet seq = scene.septuplet();
        results[j] = evaluate_septuplet(e.id, seq, job.strategy, job.mode, steps, opts);
      } catch (const std::exception& ex) {
        errors[j] = e.id + "/" + to_string(job.strategy) + "/" + to_string(job.mode) + ": " + ex.what();
        failed.store(true);
      }
    }
  };
  const unsigned n = std::min<std::size_t>(worker_count(threads), jobs.size());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  AblationTable table;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    table.rows.insert(table.rows.end(), results[j].begin(), results[j].end());
    if (!errors[j].empty()) table.errors.push_back(errors[j]);
  }
  if (!table.errors.empty()) return table;

  std::vector<int> sorted = steps;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (Strategy s : strategies) {
    for (AdaptMode m : modes) {
      for (int step : sorted) {
        CsvRow agg;
        agg.seq_id = "mean";
        agg.strategy = s;
        agg.mode = m;
        agg.step = step;
        std::size_t count = 0;
        for (const auto& r : table.rows) {
          if (r.strategy != s || r.mode != m || r.step != step) continue;
          agg.loss += r.loss;
          agg.psnr += r.psnr;
          agg.ssim += r.ssim;
          agg.adapt_ms += r.adapt_ms;
          agg.infer_ms += r.infer_ms;
          agg.n_params = std::max(agg.n_params, r.n_params);
          ++count;
        }
        if (count == 0) continue;
        const double c = static_cast<double>(count);
        agg.loss /= c;
        agg.psnr /= c;
        agg.ssim /= c;
        agg.adapt_ms /= c;
        agg.infer_ms /= c;
        table.aggregates.push_back(agg);
      }
    }
  }
  return table;
}

}  // namespace vfi
