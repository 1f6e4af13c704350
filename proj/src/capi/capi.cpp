#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <ostream>
#include <sstream>
#include <streambuf>
#include <string>

#include "stcgan/harness.hpp"
#include "stcgan/stcgan.h"

struct stcgan_config {
  stcgan::RunConfig run;
};

struct stcgan_model {
  stcgan::ModelSet<float> models;
};

namespace {

thread_local std::string g_last_error;

stcgan_status fail(stcgan_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
stcgan_status guarded(F&& body) {
  try {
    return body();
  } catch (const stcgan::Error& e) {
    return fail(static_cast<stcgan_status>(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(STCGAN_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(STCGAN_ERR_CONFIG, "out of memory");
  } catch (const std::exception& e) {
    return fail(STCGAN_ERR_CONFIG, std::string("internal error: ") + e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

stcgan_status null_arg(const char* name) {
  return fail(STCGAN_ERR_CONFIG, std::string(name) + " must not be NULL");
}

// Hands complete lines to the progress callback.
class CallbackBuf : public std::streambuf {
 public:
  CallbackBuf(stcgan_progress_fn fn, void* user) : fn_(fn), user_(user) {}
  ~CallbackBuf() override {
    if (!line_.empty()) fn_(line_.c_str(), user_);
  }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return traits_type::not_eof(ch);
    if (ch == '\n') {
      fn_(line_.c_str(), user_);
      line_.clear();
    } else {
      line_.push_back(static_cast<char>(ch));
    }
    return ch;
  }

 private:
  stcgan_progress_fn fn_;
  void* user_;
  std::string line_;
};

}  // namespace

extern "C" {

const char* stcgan_version(void) { return "1.0.0"; }

const char* stcgan_last_error(void) { return g_last_error.c_str(); }

void stcgan_string_free(char* s) { std::free(s); }

stcgan_status stcgan_config_create(stcgan_config** out) {
  if (out == nullptr) return null_arg("out");
  return guarded([&] {
    *out = new stcgan_config();
    return STCGAN_OK;
  });
}

void stcgan_config_destroy(stcgan_config* cfg) { delete cfg; }

stcgan_status stcgan_config_set(stcgan_config* cfg, const char* key, const char* value) {
  if (cfg == nullptr) return null_arg("cfg");
  if (key == nullptr || value == nullptr) return null_arg("key/value");
  return guarded([&] {
    cfg->run.set(key, value);
    return STCGAN_OK;
  });
}

stcgan_status stcgan_config_get(const stcgan_config* cfg, const char* key, char** value) {
  if (cfg == nullptr || key == nullptr || value == nullptr) return null_arg("cfg/key/value");
  return guarded([&] {
    *value = copy_string(cfg->run.get(key));
    return STCGAN_OK;
  });
}

stcgan_status stcgan_config_load(stcgan_config* cfg, const char* path) {
  if (cfg == nullptr || path == nullptr) return null_arg("cfg/path");
  return guarded([&] {
    cfg->run = stcgan::RunConfig::load(path, cfg->run);
    return STCGAN_OK;
  });
}

stcgan_status stcgan_config_serialize(const stcgan_config* cfg, char** text) {
  if (cfg == nullptr || text == nullptr) return null_arg("cfg/text");
  return guarded([&] {
    *text = copy_string(cfg->run.serialize());
    return STCGAN_OK;
  });
}

stcgan_status stcgan_train(const stcgan_config* cfg, stcgan_progress_fn progress, void* user) {
  if (cfg == nullptr) return null_arg("cfg");
  return guarded([&] {
    if (progress == nullptr) {
      stcgan::cmd_train(cfg->run, nullptr);
    } else {
      CallbackBuf buf(progress, user);
      std::ostream os(&buf);
      stcgan::cmd_train(cfg->run, &os);
    }
    return STCGAN_OK;
  });
}

stcgan_status stcgan_eval(const stcgan_config* cfg, char** report) {
  if (cfg == nullptr) return null_arg("cfg");
  return guarded([&] {
    const stcgan::EvalResult r = stcgan::cmd_eval(cfg->run);
    if (report != nullptr) *report = copy_string(stcgan::format_table(r));
    return STCGAN_OK;
  });
}

stcgan_status stcgan_infer(const stcgan_config* cfg, const char* image_path, char** paths) {
  if (cfg == nullptr || image_path == nullptr) return null_arg("cfg/image_path");
  return guarded([&] {
    const stcgan::InferOutputs files = stcgan::cmd_infer(cfg->run, image_path);
    if (paths != nullptr) {
      std::string text;
      if (!files.mask_path.empty()) text += files.mask_path + "\n";
      if (!files.image_path.empty()) text += files.image_path + "\n";
      *paths = copy_string(text);
    }
    return STCGAN_OK;
  });
}

stcgan_status stcgan_synth(const stcgan_config* cfg) {
  if (cfg == nullptr) return null_arg("cfg");
  return guarded([&] {
    stcgan::cmd_synth(cfg->run);
    return STCGAN_OK;
  });
}

stcgan_status stcgan_gradcheck(const stcgan_config* cfg, int inject_fault, char** report) {
  if (cfg == nullptr) return null_arg("cfg");
  return guarded([&] {
    cfg->run.validate();
    stcgan::set_num_threads(cfg->run.threads);
    stcgan::GradCheckSuiteOptions options;
    options.f64 = cfg->run.f64_verify;
    options.seed = cfg->run.seed;
    options.inject_fault = inject_fault != 0;
    const auto rows = stcgan::gradcheck_suite(options);
    if (report != nullptr) *report = copy_string(stcgan::format_gradcheck(rows));
    for (const auto& row : rows) {
      if (!row.pass()) return fail(STCGAN_ERR_NUMERIC, "gradient check failed: " + row.name);
    }
    return STCGAN_OK;
  });
}

stcgan_status stcgan_model_load(const char* checkpoint_path, stcgan_model** out) {
  if (checkpoint_path == nullptr || out == nullptr) return null_arg("checkpoint_path/out");
  return guarded([&] {
    auto m = std::make_unique<stcgan_model>(
        stcgan_model{stcgan::load_models(stcgan::read_checkpoint(checkpoint_path))});
    *out = m.release();
    return STCGAN_OK;
  });
}

void stcgan_model_destroy(stcgan_model* model) { delete model; }

size_t stcgan_model_size(const stcgan_model* model) {
  return model == nullptr ? 0 : model->models.cfg.image_size;
}

const char* stcgan_model_variant(const stcgan_model* model) {
  return model == nullptr ? "" : stcgan::variant_name(model->models.variant);
}

stcgan_status stcgan_model_infer(stcgan_model* model, const uint8_t* rgb, size_t width,
                                 size_t height, uint8_t* mask_out, uint8_t* image_out,
                                 int* has_mask, int* has_image) {
  if (model == nullptr || rgb == nullptr) return null_arg("model/rgb");
  if (width == 0 || height == 0) return fail(STCGAN_ERR_CONFIG, "empty input image");
  return guarded([&] {
    stcgan::Image input(width, height, 3);
    std::memcpy(input.pixels.data(), rgb, width * height * 3);
    const std::size_t s = model->models.cfg.image_size;
    stcgan::Triplet t;
    t.shadow = stcgan::resize_bilinear(input, s, s);
    stcgan::ModelPredictor predictor(model->models);
    const stcgan::Prediction p = predictor.predict(t);
    if (has_mask != nullptr) *has_mask = p.mask.has_value();
    if (has_image != nullptr) *has_image = p.image.has_value();
    if (p.mask && mask_out != nullptr) {
      for (std::size_t i = 0; i < p.mask->size(); ++i) {
        mask_out[i] = stcgan::from_model_value(2.0 * (*p.mask)[i] - 1.0);
      }
    }
    if (p.image && image_out != nullptr) {
      std::memcpy(image_out, p.image->pixels.data(), p.image->pixels.size());
    }
    return STCGAN_OK;
  });
}

}  // extern "C"
