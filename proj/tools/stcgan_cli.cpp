#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "stcgan/stcgan.h"

namespace {

struct Options {
  std::string config, dataset, split, variant, out, checkpoint, baseline, image;
  std::size_t synth = 0, size = 0, width = 0, depth = 0, steps = 0, batch = 0, threads = 0;
  std::uint64_t seed = 0;
  bool f64_verify = false, no_augment = false, inject_fault = false;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "key = value config file; flags override its keys");
  cmd->add_option("--dataset", o.dataset, "dataset root with <split>_A/_B/_C folders");
  cmd->add_option("--split", o.split, "dataset split (train or test)");
  cmd->add_option("--synth", o.synth, "use N synthetic triplets instead of a dataset");
  cmd->add_option("--size", o.size, "image side length (a power of two)");
  cmd->add_option("--width", o.width, "base channel width of the networks");
  cmd->add_option("--depth", o.depth, "encoder depth; defaults to log2(size)");
  cmd->add_option("--variant", o.variant, "full, no_d1, no_d2, no_g1d1, no_g2d2 or multi_branch");
  cmd->add_option("--steps", o.steps, "training steps");
  cmd->add_option("--batch", o.batch, "triplets per step");
  cmd->add_option("--seed", o.seed, "seed for every random choice");
  cmd->add_option("--threads", o.threads, "worker threads (default 1)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint to resume from or evaluate");
}

std::vector<std::pair<std::string, std::string>> collect(const CLI::App* cmd, const Options& o) {
  std::vector<std::pair<std::string, std::string>> kv;
  auto given = [cmd](const char* flag) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--dataset")) kv.emplace_back("dataset", o.dataset);
  if (given("--split")) kv.emplace_back("split", o.split);
  if (given("--synth")) {
    kv.emplace_back("synth", std::to_string(o.synth));
    kv.emplace_back("dataset", "");
  }
  if (given("--size")) kv.emplace_back("size", std::to_string(o.size));
  if (given("--width")) kv.emplace_back("width", std::to_string(o.width));
  if (given("--depth")) {
    kv.emplace_back("depth", std::to_string(o.depth));
  } else if (given("--size")) {
    std::size_t d = 0;
    while ((std::size_t{1} << d) < o.size) ++d;
    kv.emplace_back("depth", std::to_string(d));
  }
  if (given("--variant")) kv.emplace_back("variant", o.variant);
  if (given("--steps")) kv.emplace_back("steps", std::to_string(o.steps));
  if (given("--batch")) kv.emplace_back("batch", std::to_string(o.batch));
  if (given("--seed")) kv.emplace_back("seed", std::to_string(o.seed));
  if (given("--threads")) kv.emplace_back("threads", std::to_string(o.threads));
  if (given("--out")) kv.emplace_back("out", o.out);
  if (given("--checkpoint")) kv.emplace_back("checkpoint", o.checkpoint);
  if (given("--baseline")) kv.emplace_back("baseline", o.baseline);
  if (given("--f64-verify")) kv.emplace_back("f64_verify", o.f64_verify ? "true" : "false");
  if (given("--no-augment")) kv.emplace_back("augment", "false");
  return kv;
}

int report(stcgan_status s) {
  if (s != STCGAN_OK) std::cerr << "error: " << stcgan_last_error() << "\n";
  return static_cast<int>(s);
}

class Config {
 public:
  Config() {
    if (stcgan_config_create(&cfg_) != STCGAN_OK) cfg_ = nullptr;
  }
  ~Config() { stcgan_config_destroy(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  stcgan_config* get() const { return cfg_; }

 private:
  stcgan_config* cfg_ = nullptr;
};

void print_progress(const char* line, void*) { std::cout << line << std::endl; }

void print_and_free(char* text) {
  if (text != nullptr) std::cout << text;
  stcgan_string_free(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shadow detection and removal with stacked conditional GANs"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "train a model; writes losses.tsv and checkpoint.bin");
  add_common(train, o);
  train->add_flag("--no-augment", o.no_augment, "train on the images as-is (no crop or flip)");

  auto* eval = app.add_subcommand("eval", "BER and LAB RMSE tables for a checkpoint or baseline");
  add_common(eval, o);
  eval->add_option("--baseline", o.baseline, "identity or oracle instead of a checkpoint");

  auto* infer = app.add_subcommand("infer", "predict the mask and shadow-free image of one image");
  add_common(infer, o);
  infer->add_option("image", o.image, "input RGB image")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every operator");
  add_common(gradcheck, o);
  gradcheck->add_flag("--f64-verify", o.f64_verify, "run in 64-bit with the tighter tolerance");
  gradcheck->add_flag("--inject-fault", o.inject_fault, "add a deliberately wrong operator")
      ->group("");

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset in the ISTD layout");
  add_common(synth, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Config cfg;
  if (cfg.get() == nullptr) return report(STCGAN_ERR_CONFIG);
  if (!o.config.empty()) {
    if (const auto s = stcgan_config_load(cfg.get(), o.config.c_str()); s != STCGAN_OK) return report(s);
  }
  for (const auto& [k, v] : collect(cmd, o)) {
    if (const auto s = stcgan_config_set(cfg.get(), k.c_str(), v.c_str()); s != STCGAN_OK) {
      return report(s);
    }
  }

  if (cmd == train) return report(stcgan_train(cfg.get(), print_progress, nullptr));
  if (cmd == eval) {
    char* table = nullptr;
    const auto s = stcgan_eval(cfg.get(), &table);
    print_and_free(table);
    return report(s);
  }
  if (cmd == infer) {
    char* paths = nullptr;
    const auto s = stcgan_infer(cfg.get(), o.image.c_str(), &paths);
    print_and_free(paths);
    return report(s);
  }
  if (cmd == gradcheck) {
    char* rows = nullptr;
    const auto s = stcgan_gradcheck(cfg.get(), o.inject_fault ? 1 : 0, &rows);
    print_and_free(rows);
    return report(s);
  }
  return report(stcgan_synth(cfg.get()));
}
