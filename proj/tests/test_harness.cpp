#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "support.hpp"
#include "vfi/bench.hpp"
#include "vfi/image_io.hpp"
#include "vfi/metrics.hpp"
#include "vfi/synthetic.hpp"

using namespace vfi;
namespace fs = std::filesystem;

namespace {

ScenePattern pattern_of(MotionKind kind, TextureKind tex) {
  ScenePattern p;
  p.kind = kind;
  p.texture = tex;
  p.velocity = {1.5, 0.75};
  p.angular_rate = 0.015;
  p.affine_rate = {0.006, 0.003, -0.003, 0.006};
  return p;
}

BenchSpec tiny_bench() {
  return BenchSpec::parse(
      "bias=0.6\n"
      "sequence id=b pattern=rotate texture=sinusoid velocity=0.01 res=24x24 seed=2\n"
      "sequence id=a pattern=translate texture=value_noise velocity=1,0.5 res=24x24 seed=1\n");
}

EvalOptions small_options() {
  EvalOptions o;
  o.estimator = testing::small_estimator();
  o.bias = 0.6;
  return o;
}

}  // namespace

TEST_CASE("translation renders the shifted texture") {
  ScenePattern p = pattern_of(MotionKind::translate, TextureKind::gaussian_blobs);
  p.velocity = {2.0, 0.0};
  const SyntheticScene scene(p, 40, 20, 3);
  const Frame f0 = scene.render(0);
  for (int k = 1; k < 7; ++k) {
    const Frame fk = scene.render(k);
    for (int y = 0; y < 20; ++y) {
      for (int x = 2 * k; x < 40; ++x) {
        for (int c = 0; c < 3; ++c) CHECK(std::abs(fk.at(x, y, c) - f0.at(x - 2 * k, y, c)) < 1e-12);
      }
    }
  }
  // Frames 1 and 3 in one-based numbering are two intervals apart.
  CHECK(scene.flow(0, 2) == FlowField(40, 20, 4.0, 0.0));
}

TEST_CASE("zero rotation is static") {
  ScenePattern p = pattern_of(MotionKind::rotate, TextureKind::value_noise);
  p.angular_rate = 0.0;
  const Septuplet s = SyntheticScene(p, 32, 32, 4).septuplet();
  for (std::size_t k = 1; k < 7; ++k) CHECK(s.frame(k) == s.frame(0));
}

TEST_CASE("scenes are deterministic and seed dependent") {
  for (auto kind : {MotionKind::translate, MotionKind::rotate, MotionKind::affine, MotionKind::multiblob}) {
    for (auto tex : {TextureKind::gaussian_blobs, TextureKind::sinusoid, TextureKind::value_noise}) {
      const ScenePattern p = pattern_of(kind, tex);
      const Septuplet a = SyntheticScene(p, 32, 24, 77).septuplet();
      const Septuplet b = SyntheticScene(p, 32, 24, 77).septuplet();
      for (std::size_t k = 0; k < 7; ++k) CHECK(a.frame(k) == b.frame(k));
      const Septuplet c = SyntheticScene(p, 32, 24, 78).septuplet();
      CHECK_FALSE(c.frame(0) == a.frame(0));
    }
  }
}

TEST_CASE("motion bound") {
  ScenePattern p;
  p.velocity = {9.0, 0.0};
  CHECK_THROWS_AS(SyntheticScene(p, 32, 32, 1), std::invalid_argument);
  p.velocity = {8.0, 0.0};
  CHECK_NOTHROW(SyntheticScene(p, 32, 32, 1));
  ScenePattern r;
  r.kind = MotionKind::rotate;
  r.angular_rate = 0.5;
  CHECK_THROWS_AS(SyntheticScene(r, 32, 32, 1), std::invalid_argument);
}

TEST_CASE("oracle midpoint is exact on every pattern") {
  for (auto kind : {MotionKind::translate, MotionKind::rotate, MotionKind::affine, MotionKind::multiblob}) {
    for (auto tex : {TextureKind::gaussian_blobs, TextureKind::sinusoid, TextureKind::value_noise}) {
      const SyntheticScene scene(pattern_of(kind, tex), 64, 64, 21);
      OracleMotion oracle(scene);
      const Interpolation r = interpolate(scene.render(2), scene.render(4), oracle, {2, 4, true},
                                          init_identity(64, 64, AdapterMode::direct));
      CAPTURE(to_string(kind));
      CAPTURE(to_string(tex));
      CHECK(psnr(crop_interior(r.frame, 8), crop_interior(scene.render(3), 8)) > 40.0);
    }
  }
}

TEST_CASE("unit bias is a passthrough") {
  const Septuplet seq = SyntheticScene(pattern_of(MotionKind::affine, TextureKind::sinusoid), 24, 24, 5).septuplet();
  EstimatorMotion plain(testing::small_estimator());
  EstimatorMotion biased(testing::small_estimator(), 1.0);
  const AdapterParams p = init_identity(24, 24, AdapterMode::direct);
  CHECK(predict_held_out(seq, plain, p).frame == predict_held_out(seq, biased, p).frame);
}

TEST_CASE("sequence directory round trip") {
  const SyntheticScene scene(pattern_of(MotionKind::translate, TextureKind::value_noise), 20, 16, 6);
  const fs::path dir = fs::temp_directory_path() / "vfi_seq_rt";
  fs::remove_all(dir);
  write_sequence_dir(scene, dir);
  CHECK(fs::exists(dir / "frame_0001.png"));
  CHECK(fs::exists(dir / "frame_0007.png"));
  CHECK(fs::exists(dir / "gt_mid.png"));
  int flows = 0;
  for (const auto& e : fs::directory_iterator(dir)) flows += e.path().extension() == ".flo";
  CHECK(flows == 42);
  CHECK(read_flo(dir / "flow_1to3.flo").u(5, 5) == doctest::Approx(3.0));
  const Septuplet s = load_sequence_dir(dir);
  CHECK(load_frame(dir / "gt_mid.png") == s.frame(3));
  for (std::size_t k = 0; k < 7; ++k) {
    const Frame truth = scene.render(static_cast<double>(k));
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(std::abs(truth.data()[i] - s.frame(k).data()[i]) <= 1.0 / 510 + 1e-15);
  }
  CHECK_THROWS_AS(load_sequence_dir(dir / "nope"), std::runtime_error);
}

TEST_CASE("bench spec text round trip") {
  const BenchSpec d = default_bench();
  const BenchSpec back = BenchSpec::parse(d.to_text());
  CHECK(back.to_text() == d.to_text());
  CHECK(back.bias == 0.6);
  REQUIRE(back.sequences.size() == 20);
  CHECK(back.sequences[7].pattern.velocity.x == d.sequences[7].pattern.velocity.x);

  CHECK_THROWS(BenchSpec::parse("bias=0\n"));
  CHECK_THROWS(BenchSpec::parse("sequence id=a texture=sinusoid\n"));
  CHECK_THROWS(BenchSpec::parse("sequence id=a pattern=translate velocity=40,0 res=64x64\n"));
  CHECK_THROWS(BenchSpec::parse("sequence id=a pattern=translate\nsequence id=a pattern=rotate velocity=0\n"));
  CHECK_THROWS(BenchSpec::parse("sequence id=a pattern=translate colour=red\n"));
}

TEST_CASE("default bench layout") {
  const BenchSpec b = default_bench();
  CHECK(b.sequences.size() == 20);
  std::map<VelocityTier, int> per_tier;
  std::set<std::string> ids;
  std::set<MotionKind> kinds;
  for (const auto& e : b.sequences) {
    CHECK(e.width == 128);
    CHECK(e.height == 128);
    ++per_tier[e.tier];
    ids.insert(e.id);
    kinds.insert(e.pattern.kind);
    const double m = e.pattern.max_displacement_per_frame(e.width, e.height);
    CHECK(m <= tier_max_speed(e.tier) + 1e-12);
    CHECK(m > 0.5 * tier_max_speed(e.tier));
  }
  for (auto t : {VelocityTier::easy, VelocityTier::medium, VelocityTier::hard, VelocityTier::extreme}) CHECK(per_tier[t] == 5);
  CHECK(ids.size() == 20);
  CHECK(kinds.size() == 4);
}

TEST_CASE("evaluate_septuplet rows") {
  const Septuplet seq = SyntheticScene(pattern_of(MotionKind::translate, TextureKind::value_noise), 24, 24, 8).septuplet();
  const EvalOptions o = small_options();
  const auto rows = evaluate_septuplet("x", seq, Strategy::cycle, AdaptMode::plugin, {0, 2, 3}, o);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].step == 2);
  CHECK(rows[0].n_params == 6 * 24 * 24);

  // Step 0 is the frozen baseline under the injected bias.
  EstimatorMotion m(o.estimator, o.bias);
  const Frame base = predict_held_out(seq, m, init_identity(24, 24, AdapterMode::direct)).frame;
  CHECK(rows[0].psnr == psnr(base, seq.frame(3)));

  // Identical apart from timings.
  const auto again = evaluate_septuplet("x", seq, Strategy::cycle, AdaptMode::plugin, {0, 2, 3}, o);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(to_csv_line_untimed(rows[i]) == to_csv_line_untimed(again[i]));

  const auto naive = evaluate_septuplet("x", seq, Strategy::naive, AdaptMode::plugin, {0, 3}, o);
  CHECK(naive[0].psnr == rows[0].psnr);
  CHECK(naive[0].ssim == rows[0].ssim);

  const auto e2e = evaluate_septuplet("x", seq, Strategy::cycle, AdaptMode::e2e, {0, 1}, o);
  CHECK(e2e[0].psnr == rows[0].psnr);
  CHECK(e2e[1].n_params == 1);
  CHECK(e2e[1].adapt_ms > 0.0);
}

TEST_CASE("ablation table") {
  const BenchSpec bench = tiny_bench();
  const EvalOptions o = small_options();
  const AblationTable t = ablate(bench, {0, 2}, {Strategy::cycle, Strategy::naive}, {AdaptMode::plugin}, o, 2);
  CHECK(t.errors.empty());
  CHECK(t.rows.size() == 2 * 2 * 1 * 2);
  CHECK(t.aggregates.size() == 2 * 1 * 2);
  // Sorted by seq_id regardless of file order.
  CHECK(t.rows.front().seq_id == "a");
  CHECK(t.rows.back().seq_id == "b");
  const std::string csv = t.to_csv();
  CHECK(csv.rfind(csv_header() + "\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 1 + t.rows.size() + t.aggregates.size());

  const CsvRow* agg = t.aggregate(Strategy::cycle, AdaptMode::plugin, 2);
  REQUIRE(agg);
  double mean = 0.0;
  for (const auto& r : t.rows) {
    if (r.strategy == Strategy::cycle && r.step == 2) mean += 0.5 * r.psnr;
  }
  CHECK(agg->psnr == doctest::Approx(mean));

  // Thread count does not change anything but timings.
  const AblationTable serial = ablate(bench, {0, 2}, {Strategy::cycle, Strategy::naive}, {AdaptMode::plugin}, o, 1);
  for (std::size_t i = 0; i < t.rows.size(); ++i) CHECK(to_csv_line_untimed(t.rows[i]) == to_csv_line_untimed(serial.rows[i]));

  const AblationTable baseline = ablate(bench, {0}, {Strategy::cycle}, {AdaptMode::plugin}, o, 1);
  CHECK(baseline.rows.size() == 2);
  CHECK(baseline.rows[0].psnr == t.rows[0].psnr);

  CHECK_THROWS_AS(ablate(bench, {}, {Strategy::cycle}, {AdaptMode::plugin}, o), std::invalid_argument);
}

TEST_CASE("ablation keeps finished rows when a job fails") {
  BenchSpec bench = tiny_bench();
  // 8 px frames cannot hold the default four-level pyramid.
  bench.sequences.push_back(BenchSpec::parse("sequence id=c pattern=translate velocity=1,0 res=8x8 seed=3\n").sequences[0]);
  EvalOptions o = small_options();
  o.estimator.levels = 3;
  const AblationTable t = ablate(bench, {0, 1}, {Strategy::cycle}, {AdaptMode::plugin}, o, 1);
  CHECK_FALSE(t.errors.empty());
  CHECK(t.rows.size() == 4);
  CHECK(t.errors[0].find("c/cycle/plugin") == 0);
}

TEST_CASE("worker count honours VFI_THREADS") {
  CHECK(worker_count(3) == 3);
  setenv("VFI_THREADS", "1", 1);
  CHECK(worker_count(0) == 1);
  setenv("VFI_THREADS", "zero", 1);
  CHECK_THROWS(worker_count(0));
  unsetenv("VFI_THREADS");
  CHECK(worker_count(0) >= 1);
}
