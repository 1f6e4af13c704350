#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stcgan/harness.hpp"

namespace stcgan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& v) {
  U out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "dataset", "split",   "synth",   "size",      "width",     "depth",
      "variant", "lambda1", "lambda2", "lambda3",   "lr",        "beta1",
      "beta2",   "adam_eps", "steps",  "batch",     "seed",      "threads",
      "out",     "checkpoint", "checkpoint_every", "augment", "load_size", "hflip_prob",
      "f64_verify", "baseline"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "dataset") dataset = v;
  else if (key == "split") split = v;
  else if (key == "synth") synth = parse_unsigned<std::size_t>(key, v);
  else if (key == "size") net.image_size = parse_unsigned<std::size_t>(key, v);
  else if (key == "width") net.base_width = parse_unsigned<std::size_t>(key, v);
  else if (key == "depth") net.depth = parse_unsigned<std::size_t>(key, v);
  else if (key == "variant") variant = parse_variant(v);
  else if (key == "lambda1") weights.lambda1 = parse_double(key, v);
  else if (key == "lambda2") weights.lambda2 = parse_double(key, v);
  else if (key == "lambda3") weights.lambda3 = parse_double(key, v);
  else if (key == "lr") adam.lr = parse_double(key, v);
  else if (key == "beta1") adam.beta1 = parse_double(key, v);
  else if (key == "beta2") adam.beta2 = parse_double(key, v);
  else if (key == "adam_eps") adam.eps = parse_double(key, v);
  else if (key == "steps") steps = parse_unsigned<std::size_t>(key, v);
  else if (key == "batch") batch = parse_unsigned<std::size_t>(key, v);
  else if (key == "seed") seed = parse_unsigned<std::uint64_t>(key, v);
  else if (key == "threads") threads = static_cast<int>(parse_unsigned<unsigned>(key, v));
  else if (key == "out") out = v;
  else if (key == "checkpoint") checkpoint = v;
  else if (key == "checkpoint_every") checkpoint_every = parse_unsigned<std::size_t>(key, v);
  else if (key == "augment") augment = parse_bool(key, v);
  else if (key == "load_size") load_size = parse_unsigned<std::size_t>(key, v);
  else if (key == "hflip_prob") hflip_prob = parse_double(key, v);
  else if (key == "f64_verify") f64_verify = parse_bool(key, v);
  else if (key == "baseline") baseline = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "dataset") return dataset;
  if (key == "split") return split;
  if (key == "synth") return std::to_string(synth);
  if (key == "size") return std::to_string(net.image_size);
  if (key == "width") return std::to_string(net.base_width);
  if (key == "depth") return std::to_string(net.depth);
  if (key == "variant") return variant_name(variant);
  if (key == "lambda1") return num(weights.lambda1);
  if (key == "lambda2") return num(weights.lambda2);
  if (key == "lambda3") return num(weights.lambda3);
  if (key == "lr") return num(adam.lr);
  if (key == "beta1") return num(adam.beta1);
  if (key == "beta2") return num(adam.beta2);
  if (key == "adam_eps") return num(adam.eps);
  if (key == "steps") return std::to_string(steps);
  if (key == "batch") return std::to_string(batch);
  if (key == "seed") return std::to_string(seed);
  if (key == "threads") return std::to_string(threads);
  if (key == "out") return out;
  if (key == "checkpoint") return checkpoint;
  if (key == "checkpoint_every") return std::to_string(checkpoint_every);
  if (key == "augment") return augment ? "true" : "false";
  if (key == "load_size") return std::to_string(load_size);
  if (key == "hflip_prob") return num(hflip_prob);
  if (key == "f64_verify") return f64_verify ? "true" : "false";
  if (key == "baseline") return baseline;
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  net.validate();
  weights.validate();
  adam.validate();
  if (split.empty()) throw ConfigError("split must not be empty");
  if (dataset.empty() && synth < 1) throw ConfigError("synth must be at least 1");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be at least 1");
  if (load_size != 0 && load_size < net.image_size) {
    throw ConfigError("load_size must be 0 or at least size");
  }
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw ConfigError("hflip_prob must be in [0,1]");
  if (!baseline.empty() && baseline != "identity" && baseline != "oracle") {
    throw ConfigError("baseline must be identity or oracle");
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& k : keys()) os << k << " = " << get(k) << "\n";
  return os.str();
}

RunConfig RunConfig::parse(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig RunConfig::load(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), std::move(base));
}

RunConfig RunConfig::parse(const std::string& text) { return parse(text, RunConfig{}); }
RunConfig RunConfig::load(const std::string& path) { return load(path, RunConfig{}); }

}  // namespace stcgan
