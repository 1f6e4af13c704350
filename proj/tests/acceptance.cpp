// Acceptance run: one PASS/FAIL line per criterion. Usage:
//   acceptance [work_dir] [criterion ...]
// With no criterion numbers every criterion runs. Exit status is non-zero if
// any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stcgan/harness.hpp"
#include "stcgan/losses.hpp"

using namespace stcgan;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failure notes; the first few are kept for the report line.
struct Failures {
  std::size_t count = 0;
  std::string first;

  void note(const std::string& what) {
    if (count++ < 3) first += (first.empty() ? "" : "; ") + what;
  }
  bool any() const { return count > 0; }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += double(a.data()[i]) * b.data()[i];
  return acc;
}

// 1. Gradient correctness.
Outcome gradients() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double worst32 = 0, worst64 = 0;
  Failures f;
  for (bool f64 : {false, true}) {
    GradCheckSuiteOptions opt;
    opt.f64 = f64;
    opt.seed = 7;
    const double bar = f64 ? 1e-6 : 1e-3;
    for (const auto& row : gradcheck_suite(opt)) {
      (f64 ? worst64 : worst32) = std::max(f64 ? worst64 : worst32, row.max_rel_error);
      if (!row.pass() || row.max_rel_error > bar) f.note(row.name + (f64 ? " (64-bit)" : " (32-bit)"));
    }
  }
  const double secs = seconds_since(t0);
  o.pass = !f.any() && secs < 120.0;
  o.detail = "max rel err 32-bit " + fmt("%.2e", worst32) + " (<= 1e-3), 64-bit " +
             fmt("%.2e", worst64) + " (<= 1e-6), " + fmt("%.1f s", secs) + " (< 120 s)";
  if (f.any()) o.detail += "; failing: " + f.first;
  return o;
}

// 2. conv/convT adjoint identity <conv(x), y> == <x, convT(y)>.
Outcome adjoint() {
  struct Geometry {
    const char* name;
    std::size_t stride, pad;
  };
  // Every conv in the generators and discriminators is 4x4 with padding 1;
  // the discriminators' last two layers use stride 1.
  const Geometry geometries[] = {{"k4 s2 p1", 2, 1}, {"k4 s1 p1", 1, 1}};
  const Tensor<float> no_bias;
  std::mt19937_64 rng(11);
  Outcome o;
  double worst = 0;
  Failures f;
  for (const auto& g : geometries) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + rng() % 2, cin = 1 + rng() % 6, cout = 1 + rng() % 6;
      // The networks only see even extents; odd ones would drop a row at stride 2.
      const std::size_t h = 2 * (2 + rng() % 7), w = 2 * (2 + rng() % 7);
      auto x = random_tensor<float>({n, cin, h, w}, rng);
      auto k = random_tensor<float>({cout, cin, 4, 4}, rng);
      const auto cx = conv2d(x, k, no_bias, g.stride, g.pad);
      auto y = random_tensor<float>(cx.shape(), rng);
      // Same weight tensor: convT reads it as [Cin_of_convT, Cout_of_convT, k, k].
      const auto ty = conv_transpose2d(y, k, no_bias, g.stride, g.pad);
      if (ty.shape() != x.shape()) {
        f.note(std::string(g.name) + " convT shape mismatch");
        continue;
      }
      const double lhs = dot(cx, y), rhs = dot(x, ty);
      const double err = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-12});
      worst = std::max(worst, err);
      if (err > 1e-4) f.note(std::string(g.name) + " trial " + std::to_string(trial));
    }
  }
  o.pass = !f.any();
  o.detail = "2 geometries x 100 trials, worst rel err " + fmt("%.2e", worst) + " (<= 1e-4)";
  if (f.any()) o.detail += "; failing: " + f.first;
  return o;
}

// 3. Full-scale channel ladders read back from the layer registry.
Outcome architecture() {
  struct Row {
    const char* label;
    std::size_t in, out;
  };
  auto generator_rows = [](std::size_t in0, std::size_t out_last) {
    return std::vector<Row>{
        {"Cv0", in0, 64},      {"Cv1", 64, 128},     {"Cv2", 128, 256},    {"Cv3", 256, 512},
        {"Cv4", 512, 512},     {"Cv4", 512, 512},    {"Cv4", 512, 512},    {"Cv5", 512, 512},
        {"CvT6", 512, 512},    {"CvT7", 1024, 512},  {"CvT7", 1024, 512},  {"CvT7", 1024, 512},
        {"CvT8", 1024, 256},   {"CvT9", 512, 128},   {"CvT10", 256, 64},   {"CvT11", 128, out_last},
    };
  };
  auto discriminator_rows = [](std::size_t in0) {
    return std::vector<Row>{
        {"Cv0", in0, 64}, {"Cv1", 64, 128}, {"Cv2", 128, 256}, {"Cv3", 256, 512}, {"Cv4", 512, 1}};
  };
  Failures f;
  std::size_t entries = 0;
  auto compare = [&](const char* net, const std::vector<LayerSpec>& got, const std::vector<Row>& want) {
    if (got.size() != want.size()) {
      f.note(std::string(net) + " has " + std::to_string(got.size()) + " layers");
      return;
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
      entries += 2;
      if (got[i].label != want[i].label || got[i].in_channels != want[i].in ||
          got[i].out_channels != want[i].out) {
        f.note(std::string(net) + " layer " + std::to_string(i) + " is " + got[i].label + " " +
               std::to_string(got[i].in_channels) + "->" + std::to_string(got[i].out_channels));
      }
    }
  };
  const NetConfig full = NetConfig::full_scale();
  compare("G1", build_generator<float>(full, Role::G1).layers(), generator_rows(3, 1));
  compare("G2", build_generator<float>(full, Role::G2).layers(), generator_rows(4, 3));
  compare("D1", build_discriminator<float>(full, Role::D1).layers(), discriminator_rows(4));
  compare("D2", build_discriminator<float>(full, Role::D2).layers(), discriminator_rows(7));
  Outcome o;
  o.pass = !f.any();
  o.detail = std::to_string(entries) + " channel entries at 256/64/8 (G2 in 4, D2 in 7, CvT7 in 1024)";
  if (f.any()) o.detail += "; mismatches: " + f.first;
  return o;
}

// 4. G1 receives gradient through G2/D2 alone.
Outcome coupling() {
  std::mt19937_64 rng(4);
  auto m = build_topology<float>(NetConfig{16, 4, 4}, Variant::Full, 4);
  Batch<float> b;
  b.shadow = random_tensor<float>({2, 3, 16, 16}, rng);
  b.shadow_free = random_tensor<float>({2, 3, 16, 16}, rng);
  b.mask = random_tensor<float>({2, 1, 16, 16}, rng);
  for (float& v : b.mask.mutable_data()) v = v >= 0 ? 1.f : -1.f;
  LossWeights w;
  w.lambda2 = 0.0;
  {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    const auto out = m.generate(b.shadow, Mode::Train);
    tape.backward(generator_objective(m, b, out, w, Mode::Train, 0.0).total);
  }
  std::size_t tensors = 0, nonzero = 0;
  for (const auto& [name, p] : m.g1->parameters("g1.")) {
    ++tensors;
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    if (std::any_of(g.begin(), g.end(), [](float v) { return v != 0.f; })) ++nonzero;
  }
  Outcome o;
  o.pass = nonzero > 0;
  o.detail = std::to_string(nonzero) + " of " + std::to_string(tensors) +
             " G1 parameter tensors receive nonzero gradient with data1 and lambda2 zeroed";
  return o;
}

// 5. Overfit 8 synthetic 64x64 triplets.
Outcome overfit(const fs::path& work) {
  RunConfig cfg;
  cfg.synth = 8;
  cfg.net = NetConfig{64, 8, 6};
  cfg.steps = 2000;
  cfg.seed = 7;
  cfg.batch = 8;
  cfg.augment = false;
  cfg.checkpoint_every = 500;
  cfg.out = fresh_dir(work / "overfit_full").string();
  const TrainSummary full = cmd_train(cfg);
  const EvalResult r = cmd_eval(cfg);

  RunConfig id = cfg;
  id.baseline = "identity";
  id.out = fresh_dir(work / "overfit_identity").string();
  const EvalResult base = cmd_eval(id);

  RunConfig mb = cfg;
  mb.variant = Variant::MultiBranch;
  mb.out = fresh_dir(work / "overfit_multi_branch").string();
  const TrainSummary multi = cmd_train(mb);
  const EvalResult mr = cmd_eval(mb);

  const double ber_v = r.aggregate.detection->ber;
  const double rmse = r.aggregate.removal->all, rmse_id = base.aggregate.removal->all;
  const bool multi_ok = multi.steps == 2000 && mr.aggregate.detection && mr.aggregate.removal;
  Outcome o;
  o.pass = ber_v <= 5.0 && rmse <= 0.5 * rmse_id && full.seconds <= 1800 && multi_ok &&
           multi.seconds <= 1800;
  o.detail = "full: BER " + fmt("%.3f%%", ber_v) + " (<= 5%), rmse_all " + fmt("%.3f", rmse) +
             " vs identity " + fmt("%.3f", rmse_id) + " = " + fmt("%.3f", rmse / rmse_id) +
             "x (<= 0.5x), " + fmt("%.0f s", full.seconds) + "; multi_branch " +
             (multi_ok ? "completed" : "did not complete") + " in " + fmt("%.0f s", multi.seconds) +
             " (rmse_all " + fmt("%.3f", mr.aggregate.removal ? mr.aggregate.removal->all : -1.0) +
             ") (each <= 1800 s)";
  return o;
}

// 6. Every topology trains for 50 steps and reports the metrics it supports.
Outcome ablation(const fs::path& work) {
  Failures f;
  for (Variant v : {Variant::Full, Variant::NoD1, Variant::NoD2, Variant::NoG1D1, Variant::NoG2D2,
                    Variant::MultiBranch}) {
    const std::string name = variant_name(v);
    RunConfig cfg;
    cfg.variant = v;
    cfg.steps = 50;
    cfg.seed = 7;
    cfg.out = fresh_dir(work / ("ablation_" + name)).string();
    try {
      cmd_train(cfg);
      std::istringstream log(slurp(fs::path(cfg.out) / "losses.tsv"));
      std::string header, col;
      std::getline(log, header);
      std::vector<std::string> cols;
      std::istringstream hs(header);
      while (std::getline(hs, col, '\t')) cols.push_back(col);
      if (cols != loss_log_columns(v)) f.note(name + " log header " + header);
      std::size_t rows = 0;
      for (std::string line; std::getline(log, line);) ++rows;
      if (rows != 50) f.note(name + " logged " + std::to_string(rows) + " rows");
      const EvalResult r = cmd_eval(cfg);
      if (r.aggregate.detection.has_value() != has_detection(v)) f.note(name + " detection column");
      if (r.aggregate.removal.has_value() != has_removal(v)) f.note(name + " removal column");
    } catch (const std::exception& e) {
      f.note(name + ": " + e.what());
    }
  }
  Outcome o;
  o.pass = !f.any();
  o.detail = "6 topologies x 50 steps; removal absent only for no_g2d2, detection absent only for no_g1d1";
  if (f.any()) o.detail += "; failing: " + f.first;
  return o;
}

// 7. Metrics against the brute-force oracles.
Outcome metric_oracles() {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> byte(0, 255);
  Failures f;
  double worst = 0;
  auto close = [&](double got, double want) {
    const double err = std::abs(got - want) / std::max(1.0, std::abs(want));
    worst = std::max(worst, err);
    return err <= 1e-6;
  };
  for (int trial = 0; trial < 200; ++trial) {
    Image gt_mask(8, 8, 1), gt(8, 8, 3), pred(8, 8, 3);
    std::vector<int> bits(64);
    std::vector<double> prob(64);
    const double p_shadow = u(rng);
    for (std::size_t i = 0; i < 64; ++i) {
      bits[i] = u(rng) < p_shadow;
      gt_mask.pixels[i] = bits[i] ? 255 : 0;
      prob[i] = u(rng);
    }
    for (auto& p : gt.pixels) p = static_cast<std::uint8_t>(byte(rng));
    for (auto& p : pred.pixels) p = static_cast<std::uint8_t>(byte(rng));

    if (!close(ber(confusion(prob, gt_mask)), oracle::ber(oracle::count(prob, bits, 0.5)))) {
      f.note("ber trial " + std::to_string(trial));
    }
    oracle::Squares sq;
    oracle::accumulate(sq, pred.pixels, gt.pixels, bits);
    const RmseSplit r = rmse_lab(pred, gt, gt_mask);
    if (!close(r.all, sq.rmse_all()) || (r.shadow_present && !close(r.shadow, sq.rmse_shadow())) ||
        (r.nonshadow_present && !close(r.nonshadow, sq.rmse_nonshadow()))) {
      f.note("rmse trial " + std::to_string(trial));
    }
  }
  const double example = ber(ConfusionCounts{90, 80, 20, 10});
  if (example != 15.0) f.note("tp=90 fn=10 tn=80 fp=20 gives " + fmt("%.12g", example));
  Outcome o;
  o.pass = !f.any();
  o.detail = "200 random 8x8 cases, worst rel err " + fmt("%.2e", worst) +
             " (<= 1e-6); tp=90 fn=10 tn=80 fp=20 -> " + fmt("%.12g", example);
  if (f.any()) o.detail += "; failing: " + f.first;
  return o;
}

// 8. Two identical runs produce identical bytes.
Outcome determinism(const fs::path& work) {
  std::string logs[2], ckpts[2];
  for (int run = 0; run < 2; ++run) {
    RunConfig cfg;
    cfg.synth = 8;
    cfg.steps = 200;
    cfg.seed = 7;
    cfg.threads = 1;
    cfg.out = fresh_dir(work / ("determinism_" + std::to_string(run))).string();
    cmd_train(cfg);
    logs[run] = slurp(fs::path(cfg.out) / "losses.tsv");
    ckpts[run] = slurp(fs::path(cfg.out) / "checkpoint.bin");
  }
  Outcome o;
  o.pass = !logs[0].empty() && !ckpts[0].empty() && logs[0] == logs[1] && ckpts[0] == ckpts[1];
  o.detail = std::string("losses.tsv ") + (logs[0] == logs[1] ? "identical" : "differs") +
             " (" + std::to_string(logs[0].size()) + " bytes), checkpoint.bin " +
             (ckpts[0] == ckpts[1] ? "identical" : "differs") + " (" +
             std::to_string(ckpts[0].size()) + " bytes)";
  return o;
}

// 9. LAB reference colors.
Outcome color() {
  struct Ref {
    const char* name;
    std::uint8_t r, g, b;
    double L, a, bb, tol;
  };
  const Ref refs[] = {{"white", 255, 255, 255, 100.0, 0.0, 0.0, 0.01},
                      {"black", 0, 0, 0, 0.0, 0.0, 0.0, 1e-9},
                      {"red", 255, 0, 0, 53.24, 80.09, 67.20, 0.05}};
  Outcome o;
  for (const auto& ref : refs) {
    const Lab v = srgb_to_lab(ref.r, ref.g, ref.b);
    const double err = std::max({std::abs(v.L - ref.L), std::abs(v.a - ref.a), std::abs(v.b - ref.bb)});
    if (err > ref.tol) o.pass = false;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s%s (%.4f, %.4f, %.4f) tol %g", o.detail.empty() ? "" : "; ",
                  ref.name, v.L, v.a, v.b, ref.tol);
    o.detail += buf;
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "stcgan_acceptance";
  std::set<int> selected;
  for (int i = 2; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"conv/convT adjoint identity", adjoint},
      {"full-scale channel ladders", architecture},
      {"stacked coupling", coupling},
      {"overfit capability", [&] { return overfit(work); }},
      {"ablation harness", [&] { return ablation(work); }},
      {"metric oracles", metric_oracles},
      {"determinism", [&] { return determinism(work); }},
      {"color conversion", color},
  };

  fs::create_directories(work);
  set_num_threads(1);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
