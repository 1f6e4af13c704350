#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stcgan/harness.hpp"

using namespace stcgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stcgan_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

RunConfig tiny(const fs::path& out) {
  RunConfig c;
  c.net = NetConfig{16, 4, 4};
  c.synth = 3;
  c.steps = 6;
  c.seed = 7;
  c.checkpoint_every = 4;
  c.out = out.string();
  return c;
}

}  // namespace

TEST_CASE("config text round trip") {
  RunConfig c;
  c.synth = 4;
  c.net = NetConfig{32, 4, 5};
  c.variant = Variant::NoG1D1;
  c.weights.lambda1 = 2.5;
  c.adam.lr = 1e-3;
  c.seed = 123;
  c.augment = false;
  c.out = "some dir";
  const RunConfig back = RunConfig::parse(c.serialize());
  CHECK(back.serialize() == c.serialize());
  CHECK(back.variant == Variant::NoG1D1);
  CHECK(back.weights.lambda1 == 2.5);
  CHECK(back.out == "some dir");

  for (const auto& k : RunConfig::keys()) CHECK_NOTHROW(c.get(k));

  const RunConfig p = RunConfig::parse("# comment\n\nsteps = 42\n  seed=9  \nvariant = no_d2\n");
  CHECK(p.steps == 42);
  CHECK(p.seed == 9);
  CHECK(p.variant == Variant::NoD2);
  CHECK(p.batch == 1);

  CHECK_THROWS_AS(RunConfig::parse("colour = blue\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("steps = ten\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("steps 10\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("variant = both\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/stcgan.cfg"), IoError);

  RunConfig bad;
  bad.batch = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.net.image_size = 48;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = RunConfig{};
  bad.baseline = "median";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("loss log columns follow the topology") {
  using V = std::vector<std::string>;
  CHECK(loss_log_columns(Variant::Full) ==
        V{"step", "data1", "data2", "adv_g1", "adv_g2", "d1_loss", "d2_loss", "total_g"});
  CHECK(loss_log_columns(Variant::NoG2D2) == V{"step", "data1", "adv_g1", "d1_loss", "total_g"});
  CHECK(loss_log_columns(Variant::NoG1D1) == V{"step", "data2", "adv_g2", "d2_loss", "total_g"});
  CHECK(loss_log_columns(Variant::NoD1) ==
        V{"step", "data1", "data2", "adv_g2", "d2_loss", "total_g"});
}

TEST_CASE("train writes config, log and checkpoint and is reproducible") {
  const fs::path a = scratch_dir("train_a"), b = scratch_dir("train_b");
  const TrainSummary s = cmd_train(tiny(a));
  CHECK(s.steps == 6);
  CHECK(fs::exists(a / "checkpoint.bin"));
  CHECK(read_checkpoint(s.checkpoint_path).step == 6);

  const auto log = lines_of(slurp(a / "losses.tsv"));
  REQUIRE(log.size() == 7);
  CHECK(log[0].rfind("step\tdata1\tdata2", 0) == 0);
  CHECK(log[1].rfind("1\t", 0) == 0);
  CHECK(log[6].rfind("6\t", 0) == 0);

  // The persisted config alone reproduces the run.
  RunConfig again = RunConfig::load((a / "config.txt").string());
  again.out = b.string();
  cmd_train(again);
  CHECK(slurp(a / "losses.tsv") == slurp(b / "losses.tsv"));
  CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("resumed training appends to the log") {
  const fs::path a = scratch_dir("resume_a"), b = scratch_dir("resume_b");
  cmd_train(tiny(a));

  RunConfig first = tiny(b);
  first.steps = 4;
  cmd_train(first);
  RunConfig rest = tiny(b);
  rest.checkpoint = (b / "checkpoint.bin").string();
  cmd_train(rest);
  CHECK(slurp(a / "losses.tsv") == slurp(b / "losses.tsv"));
  CHECK(slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("detection-only training omits removal columns") {
  const fs::path dir = scratch_dir("no_g2d2");
  RunConfig c = tiny(dir);
  c.variant = Variant::NoG2D2;
  c.steps = 2;
  cmd_train(c);
  const auto log = lines_of(slurp(dir / "losses.tsv"));
  CHECK(log[0] == "step\tdata1\tadv_g1\td1_loss\ttotal_g");

  c.checkpoint = (dir / "checkpoint.bin").string();
  const EvalResult r = cmd_eval(c);
  CHECK(r.aggregate.detection.has_value());
  CHECK_FALSE(r.aggregate.removal.has_value());
  fs::remove_all(dir);
}

TEST_CASE("eval baselines and repeatability") {
  const fs::path dir = scratch_dir("eval");
  RunConfig c = tiny(dir);
  c.baseline = "oracle";
  const EvalResult oracle_r = cmd_eval(c);
  CHECK(oracle_r.aggregate.detection->ber == 0.0);
  CHECK(oracle_r.aggregate.removal->all == 0.0);

  c.baseline = "identity";
  const EvalResult id = cmd_eval(c);
  oracle::Squares gap;
  for (const auto& t : resolve_dataset(c)) {
    std::vector<int> bits;
    for (auto v : t.mask.pixels) bits.push_back(v != 0);
    oracle::accumulate(gap, t.shadow.pixels, t.shadow_free.pixels, bits);
  }
  CHECK(id.aggregate.removal->shadow == doctest::Approx(gap.rmse_shadow()).epsilon(1e-6));
  CHECK(id.aggregate.removal->nonshadow == 0.0);
  CHECK(fs::exists(dir / "eval.tsv"));
  CHECK(fs::exists(dir / "eval.txt"));

  RunConfig t = tiny(dir);
  t.steps = 2;
  cmd_train(t);
  const std::string first = (cmd_eval(t), slurp(dir / "eval.tsv"));
  const std::string second = (cmd_eval(t), slurp(dir / "eval.tsv"));
  CHECK(first == second);
  fs::remove_all(dir);
}

TEST_CASE("infer writes a mask and an image at the model size") {
  const fs::path dir = scratch_dir("infer");
  RunConfig c = tiny(dir);
  c.steps = 2;
  cmd_train(c);
  Image input = synth_triplets(1, 40, 3)[0].shadow;
  encode_image((dir / "photo.png").string(), input);

  c.checkpoint = (dir / "checkpoint.bin").string();
  c.out = (dir / "pred").string();
  const InferOutputs files = cmd_infer(c, (dir / "photo.png").string());
  const Image mask = decode_image(files.mask_path), image = decode_image(files.image_path);
  CHECK(mask.channels == 1);
  CHECK(mask.width == 16);
  CHECK(mask.height == 16);
  CHECK(image.channels == 3);
  CHECK(image.width == 16);

  RunConfig no_ckpt = c;
  no_ckpt.checkpoint.clear();
  CHECK_THROWS_AS(cmd_infer(no_ckpt, (dir / "photo.png").string()), ConfigError);
  CHECK_THROWS_AS(cmd_infer(c, (dir / "missing.png").string()), IoError);
  fs::remove_all(dir);
}

TEST_CASE("synth writes a reloadable dataset") {
  const fs::path a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  RunConfig c;
  c.synth = 10;
  c.net = NetConfig{16, 4, 4};
  c.seed = 3;
  c.out = a.string();
  cmd_synth(c);
  c.out = b.string();
  cmd_synth(c);

  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
  }
  CHECK(files == 30);
  const auto back = load_dataset(a.string(), "train");
  REQUIRE(back.size() == 10);
  const auto fresh = synth_triplets(10, 16, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK_NOTHROW(back[i].validate());
    CHECK(back[i].shadow == fresh[i].shadow);
    CHECK(back[i].mask == fresh[i].mask);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("gradient check suite") {
  GradCheckSuiteOptions o;
  o.seed = 3;
  for (const auto& row : gradcheck_suite(o)) {
    CAPTURE(row.name);
    CHECK(row.pass());
    CHECK(row.tolerance == 1e-3);
  }
  o.f64 = true;
  for (const auto& row : gradcheck_suite(o)) {
    CAPTURE(row.name);
    CHECK(row.pass());
    CHECK(row.tolerance == 1e-6);
  }
  o.f64 = false;
  o.inject_fault = true;
  std::size_t failing = 0;
  for (const auto& row : gradcheck_suite(o)) {
    if (!row.pass()) {
      ++failing;
      CHECK(row.name.find("faulty") != std::string::npos);
    }
  }
  CHECK(failing == 1);
}
