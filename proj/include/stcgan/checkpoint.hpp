#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcgan/nets.hpp"

namespace stcgan {

// Binary layout, all integers little-endian:
//   "STCGAN1\0"
//   repeated { u32 name_len, name bytes, u32 rank, u32 dims[rank], f32 values[] }
//   u64 step
// Parameters and BN statistics come first, optimizer moments follow under
// "<param>.adam.m" / "<param>.adam.v".
struct CheckpointRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<CheckpointRecord> records;
  std::uint64_t step = 0;

  const CheckpointRecord* find(const std::string& name) const;
  bool contains(const std::string& name) const { return find(name) != nullptr; }
};

inline constexpr char kCheckpointMagic[8] = {'S', 'T', 'C', 'G', 'A', 'N', '1', '\0'};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
// Throws IoError on a bad magic, truncated record or trailing garbage.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes through a temporary file and renames it over `path`, so a failed
// write leaves the previous checkpoint intact.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

template <typename T>
void append_records(Checkpoint& ckpt, const NamedTensors<T>& tensors,
                    const std::string& suffix = "");

// Copies matching records into `targets`. Throws ConfigError naming the first
// tensor that is missing or has a different shape.
template <typename T>
void restore_records(const Checkpoint& ckpt, const NamedTensors<T>& targets,
                     const std::string& suffix = "");

struct Architecture {
  NetConfig cfg;
  Variant variant = Variant::Full;
};

// Recovers the topology and scale from the record names and weight shapes.
Architecture infer_architecture(const Checkpoint& ckpt);

}  // namespace stcgan
