#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stcgan/checkpoint.hpp"
#include "stcgan/data.hpp"
#include "stcgan/metrics.hpp"
#include "stcgan/optim.hpp"

namespace stcgan {

// Everything a command needs. Serialized as `key = value` lines; see
// RunConfig::keys() for the accepted keys.
struct RunConfig {
  std::string dataset;         // dataset root; empty means synthetic data
  std::string split = "train";
  std::size_t synth = 8;       // synthetic triplet count when dataset is empty
  NetConfig net;
  Variant variant = Variant::Full;
  LossWeights weights;
  AdamConfig adam;
  std::size_t steps = 500;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "run";
  std::string checkpoint;      // train: resume from; eval/infer: weights to load
  std::size_t checkpoint_every = 100;
  bool augment = true;
  std::size_t load_size = 0;   // 0 selects round(size * 286 / 256)
  double hflip_prob = 0.5;
  bool f64_verify = false;
  std::string baseline;        // eval without a checkpoint: "identity" or "oracle"

  static const std::vector<std::string>& keys();
  // Throws ConfigError for an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  std::string serialize() const;
  // Parses `key = value` lines; blank lines and '#' comments are ignored.
  static RunConfig parse(const std::string& text, RunConfig base);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path, RunConfig base);
  static RunConfig load(const std::string& path);
};

// Triplets named by the config: the dataset split, or synthetic data at the model size.
std::vector<Triplet> resolve_dataset(const RunConfig& cfg);

// Column names of the loss log for a topology, starting with "step".
std::vector<std::string> loss_log_columns(Variant variant);
std::string loss_log_row(std::uint64_t step, const LossBreakdown& parts, Variant variant);

struct TrainSummary {
  std::uint64_t steps = 0;
  LossBreakdown last;
  std::string checkpoint_path;
  std::string log_path;
  double seconds = 0;
};

// Writes <out>/config.txt, appends one row per step to <out>/losses.tsv and
// writes <out>/checkpoint.bin every checkpoint_every steps and at the end.
TrainSummary cmd_train(const RunConfig& cfg, std::ostream* progress = nullptr);

// Loads the checkpoint (or the named baseline) and evaluates it on the
// configured data; writes <out>/eval.txt and <out>/eval.tsv.
EvalResult cmd_eval(const RunConfig& cfg);

struct InferOutputs {
  std::string mask_path;   // empty when the topology has no detector
  std::string image_path;  // empty when the topology has no remover
};

InferOutputs cmd_infer(const RunConfig& cfg, const std::string& image_path);

struct GradCheckRow {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  std::string worst;  // leaf and index of the worst probe
  std::size_t probes = 0;
  std::size_t kinked = 0;  // probes skipped at a kink
  bool pass() const { return probes > 0 && max_rel_error <= tolerance; }
};

struct GradCheckSuiteOptions {
  bool f64 = false;
  std::uint64_t seed = 0;
  // Adds an op whose backward is scaled by 1.5, which the suite must flag.
  bool inject_fault = false;
  // Probes per leaf for the network objectives (0 = every element).
  std::size_t objective_samples = 48;
};

// Every differentiable op plus the generator and discriminator objectives of
// a width-4, size-16 full topology. 32-bit: eps 1e-3, tolerance 1e-3;
// 64-bit: eps 1e-6, tolerance 1e-6.
std::vector<GradCheckRow> gradcheck_suite(const GradCheckSuiteOptions& options);
std::string format_gradcheck(const std::vector<GradCheckRow>& rows);

// Writes <out>/train_A|_B|_C.
std::vector<Triplet> cmd_synth(const RunConfig& cfg);

// Evaluates a trained model set; triplets must already be at the model size.
class ModelPredictor : public Predictor {
 public:
  explicit ModelPredictor(ModelSet<float>& models) : models_(models) {}
  std::string name() const override { return std::string("model/") + variant_name(models_.variant); }
  Prediction predict(const Triplet& t) override;

 private:
  ModelSet<float>& models_;
};

// Rebuilds the topology recorded in a checkpoint and loads its weights.
ModelSet<float> load_models(const Checkpoint& ckpt);

}  // namespace stcgan
