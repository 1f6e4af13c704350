#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "stcgan/harness.hpp"
#include "stcgan/rng.hpp"

namespace fs = std::filesystem;

namespace stcgan {

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<Triplet> at_size(const std::vector<Triplet>& data, std::size_t size) {
  std::vector<Triplet> out;
  out.reserve(data.size());
  for (const auto& t : data) out.push_back(resize_triplet(t, size));
  return out;
}

// Sample order for one epoch; depends only on the run seed and the epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(seed, fnv1a64("epoch"), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

std::vector<Triplet> resolve_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty()) return synth_triplets(cfg.synth, cfg.net.image_size, cfg.seed);
  auto data = load_dataset(cfg.dataset, cfg.split);
  if (data.empty()) {
    throw ConfigError("dataset '" + cfg.dataset + "' split '" + cfg.split + "' is empty");
  }
  return data;
}

std::vector<std::string> loss_log_columns(Variant v) {
  std::vector<std::string> cols = {"step"};
  if (has_detection(v)) cols.push_back("data1");
  if (has_removal(v)) cols.push_back("data2");
  if (has_d1(v)) cols.push_back("adv_g1");
  if (has_d2(v)) cols.push_back("adv_g2");
  if (has_d1(v)) cols.push_back("d1_loss");
  if (has_d2(v)) cols.push_back("d2_loss");
  cols.push_back("total_g");
  return cols;
}

std::string loss_log_row(std::uint64_t step, const LossBreakdown& p, Variant v) {
  std::string row = std::to_string(step);
  auto add = [&row](double x) { row += "\t" + g9(x); };
  if (has_detection(v)) add(p.data1);
  if (has_removal(v)) add(p.data2);
  if (has_d1(v)) add(p.adv_g1);
  if (has_d2(v)) add(p.adv_g2);
  if (has_d1(v)) add(p.d1_loss);
  if (has_d2(v)) add(p.d2_loss);
  add(p.total_g);
  return row;
}

TrainSummary cmd_train(const RunConfig& cfg, std::ostream* progress) {
  cfg.validate();
  set_num_threads(cfg.threads);
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Triplet> data = resolve_dataset(cfg);

  ensure_dir(cfg.out);
  const fs::path out(cfg.out);
  write_text(out / "config.txt", cfg.serialize());

  TrainState<float> state =
      make_train_state<float>(cfg.net, cfg.variant, cfg.seed, cfg.adam, cfg.weights);
  if (!cfg.checkpoint.empty()) restore_checkpoint(state, read_checkpoint(cfg.checkpoint));

  TrainSummary summary;
  summary.checkpoint_path = (out / "checkpoint.bin").string();
  summary.log_path = (out / "losses.tsv").string();
  const bool fresh = state.step == 0;
  std::ofstream log(summary.log_path, fresh ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot write '" + summary.log_path + "'");
  if (fresh) {
    const auto cols = loss_log_columns(cfg.variant);
    for (std::size_t i = 0; i < cols.size(); ++i) log << (i ? "\t" : "") << cols[i];
    log << "\n";
  }

  AugmentSpec spec;
  spec.crop_size = cfg.net.image_size;
  spec.load_size = cfg.load_size ? cfg.load_size : AugmentSpec::default_load_size(spec.crop_size);
  spec.hflip_prob = cfg.hflip_prob;
  const std::vector<Triplet> base = cfg.augment ? std::vector<Triplet>{}
                                                : at_size(data, cfg.net.image_size);

  const std::size_t n = data.size();
  std::uint64_t cached_epoch = ~std::uint64_t{0};
  std::vector<std::size_t> order;
  std::uint64_t last_saved = state.step;
  while (state.step < cfg.steps) {
    std::vector<Triplet> samples;
    samples.reserve(cfg.batch);
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const std::uint64_t g = state.step * cfg.batch + b;
      const std::uint64_t epoch = g / n;
      if (epoch != cached_epoch) {
        order = epoch_order(n, cfg.seed, epoch);
        cached_epoch = epoch;
      }
      const std::size_t idx = order[g % n];
      if (cfg.augment) {
        spec.seed = augment_seed(cfg.seed, data[idx].id, epoch);
        samples.push_back(augment(data[idx], spec));
      } else {
        samples.push_back(base[idx]);
      }
    }
    std::vector<const Triplet*> ptrs;
    for (const auto& s : samples) ptrs.push_back(&s);
    const Batch<float> batch = make_batch<float>(ptrs);

    summary.last = alternating_update(state, batch);
    log << loss_log_row(state.step, summary.last, cfg.variant) << "\n";
    log.flush();
    if (state.step % cfg.checkpoint_every == 0) {
      write_checkpoint(summary.checkpoint_path, make_checkpoint(state));
      last_saved = state.step;
    }
    if (progress != nullptr && (state.step % 50 == 0 || state.step == cfg.steps)) {
      *progress << "step " << state.step << "/" << cfg.steps << "  total_g "
                << g9(summary.last.total_g) << "\n";
    }
  }
  if (last_saved != state.step || !fs::exists(summary.checkpoint_path)) {
    write_checkpoint(summary.checkpoint_path, make_checkpoint(state));
  }
  summary.steps = state.step;
  summary.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

ModelSet<float> load_models(const Checkpoint& ckpt) {
  const Architecture arch = infer_architecture(ckpt);
  ModelSet<float> models = build_topology<float>(arch.cfg, arch.variant, 0);
  restore_records(ckpt, models.state());
  return models;
}

Prediction ModelPredictor::predict(const Triplet& t) {
  NoGradScope<float> no_grad;
  const Tensor<float> x = to_model_space<float>(t.shadow);
  const Generated<float> out = models_.generate(x, Mode::Eval);
  Prediction p;
  if (out.mask.defined()) {
    std::vector<double> prob(out.mask.numel());
    const auto m = out.mask.data();
    for (std::size_t i = 0; i < prob.size(); ++i) prob[i] = 0.5 * (m[i] + 1.0);
    p.mask = std::move(prob);
  }
  if (out.image.defined()) p.image = from_model_space(out.image);
  return p;
}

EvalResult cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  set_num_threads(cfg.threads);
  const std::vector<Triplet> data = resolve_dataset(cfg);
  EvalResult result;
  if (!cfg.baseline.empty()) {
    const auto sized = at_size(data, cfg.net.image_size);
    if (cfg.baseline == "oracle") {
      OraclePredictor p;
      result = evaluate(p, sized);
    } else {
      IdentityPredictor p;
      result = evaluate(p, sized);
    }
  } else {
    const std::string path =
        cfg.checkpoint.empty() ? (fs::path(cfg.out) / "checkpoint.bin").string() : cfg.checkpoint;
    ModelSet<float> models = load_models(read_checkpoint(path));
    ModelPredictor p(models);
    result = evaluate(p, at_size(data, models.cfg.image_size));
  }
  ensure_dir(cfg.out);
  write_text(fs::path(cfg.out) / "eval.txt", format_table(result));
  write_text(fs::path(cfg.out) / "eval.tsv", format_tsv(result));
  return result;
}

InferOutputs cmd_infer(const RunConfig& cfg, const std::string& image_path) {
  cfg.validate();
  set_num_threads(cfg.threads);
  if (cfg.checkpoint.empty()) throw ConfigError("infer needs a checkpoint");
  ModelSet<float> models = load_models(read_checkpoint(cfg.checkpoint));
  const Image input = decode_image(image_path);
  if (input.channels != 3) throw ConfigError("infer expects an RGB image");
  const std::size_t s = models.cfg.image_size;
  const Image sized = resize_bilinear(input, s, s);

  Generated<float> out;
  {
    NoGradScope<float> no_grad;
    out = models.generate(to_model_space<float>(sized), Mode::Eval);
  }
  ensure_dir(cfg.out);
  const std::string stem = fs::path(image_path).stem().string();
  InferOutputs files;
  if (out.mask.defined()) {
    files.mask_path = (fs::path(cfg.out) / (stem + "_mask.png")).string();
    encode_image(files.mask_path, from_model_space(out.mask));
  }
  if (out.image.defined()) {
    files.image_path = (fs::path(cfg.out) / (stem + "_shadow_free.png")).string();
    encode_image(files.image_path, from_model_space(out.image));
  }
  return files;
}

std::vector<Triplet> cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  auto triplets = synth_triplets(cfg.synth, cfg.net.image_size, cfg.seed);
  ensure_dir(cfg.out);
  write_dataset(cfg.out, cfg.split, triplets);
  return triplets;
}

}  // namespace stcgan
