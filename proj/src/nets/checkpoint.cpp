#include "stcgan/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace stcgan {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw IoError(std::string("checkpoint truncated while reading ") + what);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string text(std::size_t n) {
    need(n, "record name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  for (const auto& r : ckpt.records) {
    if (shape_numel(r.shape) != r.values.size()) {
      throw ConfigError("checkpoint record '" + r.name + "' has inconsistent shape");
    }
    put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u32(out, static_cast<std::uint32_t>(r.shape.size()));
    for (std::size_t d : r.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : r.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u32(out, bits);
    }
  }
  put_u64(out, ckpt.step);
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic + 8 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw IoError("not a checkpoint (bad magic)");
  }
  std::vector<std::uint8_t> body(bytes.begin() + sizeof kCheckpointMagic, bytes.end());
  Reader in(body);
  Checkpoint ckpt;
  // No record count is stored: records run until only the step counter is left.
  while (in.remaining() > 8) {
    CheckpointRecord r;
    r.name = in.text(in.u32("name length"));
    const std::uint32_t rank = in.u32("rank");
    if (rank > 8) throw IoError("checkpoint record '" + r.name + "' has implausible rank");
    for (std::uint32_t i = 0; i < rank; ++i) r.shape.push_back(in.u32("dims"));
    const std::size_t n = shape_numel(r.shape);
    in.need(4 * n, "payload");
    r.values.resize(n);
    for (float& v : r.values) {
      const std::uint32_t bits = in.u32("payload");
      std::memcpy(&v, &bits, sizeof v);
    }
    ckpt.records.push_back(std::move(r));
  }
  if (in.remaining() != 8) throw IoError("checkpoint truncated before the step counter");
  ckpt.step = in.u64("step");
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at '" + path + "': " + ec.message());
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

template <typename T>
void append_records(Checkpoint& ckpt, const NamedTensors<T>& tensors, const std::string& suffix) {
  for (const auto& [name, t] : tensors) {
    CheckpointRecord r;
    r.name = name + suffix;
    r.shape = t.shape();
    r.values.assign(t.data().begin(), t.data().end());
    ckpt.records.push_back(std::move(r));
  }
}

template <typename T>
void restore_records(const Checkpoint& ckpt, const NamedTensors<T>& targets,
                     const std::string& suffix) {
  for (const auto& [name, t] : targets) {
    const CheckpointRecord* r = ckpt.find(name + suffix);
    if (r == nullptr) {
      throw ConfigError("checkpoint does not match the model: missing '" + name + suffix + "'");
    }
    if (r->shape != t.shape()) {
      throw ConfigError("checkpoint does not match the model: '" + name + suffix + "' is " +
                        shape_str(r->shape) + ", model expects " + shape_str(t.shape()));
    }
    auto dst = Tensor<T>(t).mutable_data();
    std::copy(r->values.begin(), r->values.end(), dst.begin());
  }
}

Architecture infer_architecture(const Checkpoint& ckpt) {
  Architecture arch;
  const bool trunk = ckpt.contains("trunk.enc0.weight");
  const bool g1 = ckpt.contains("g1.enc0.weight");
  const bool g2 = ckpt.contains("g2.enc0.weight");
  const bool d1 = ckpt.contains("d1.conv0.weight");
  const bool d2 = ckpt.contains("d2.conv0.weight");
  std::string net;
  if (trunk) {
    arch.variant = Variant::MultiBranch;
    net = "trunk";
  } else if (g1 && g2) {
    arch.variant = !d1 ? Variant::NoD1 : !d2 ? Variant::NoD2 : Variant::Full;
    net = "g1";
  } else if (g1) {
    arch.variant = Variant::NoG2D2;
    net = "g1";
  } else if (g2) {
    arch.variant = Variant::NoG1D1;
    net = "g2";
  } else {
    throw ConfigError("checkpoint holds no generator weights");
  }
  const CheckpointRecord* first = ckpt.find(net + ".enc0.weight");
  if (first->shape.size() != 4) throw ConfigError("checkpoint: malformed '" + first->name + "'");
  arch.cfg.base_width = first->shape[0];
  std::size_t depth = 0;
  while (ckpt.contains(net + ".enc" + std::to_string(depth) + ".weight")) ++depth;
  arch.cfg.depth = depth;
  arch.cfg.image_size = depth < 8 * sizeof(std::size_t) ? std::size_t{1} << depth : 0;
  arch.cfg.validate();
  return arch;
}

template void append_records(Checkpoint&, const NamedTensors<float>&, const std::string&);
template void append_records(Checkpoint&, const NamedTensors<double>&, const std::string&);
template void restore_records(const Checkpoint&, const NamedTensors<float>&, const std::string&);
template void restore_records(const Checkpoint&, const NamedTensors<double>&, const std::string&);

}  // namespace stcgan
