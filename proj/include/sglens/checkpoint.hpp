#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sglens/discriminator.hpp"
#include "sglens/generator.hpp"

namespace sglens {

// On-disk layout (.sgln), all integers little-endian:
//   "SGLN" | u32 version | u32 entry count |
//   entries: u32 key length, key bytes, u8 dtype, u32 rank, u32 dims[rank], data |
//   u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

struct CheckpointEntry {
  std::string key;
  std::vector<std::uint32_t> dims;
  DType dtype = DType::kF32;
  std::vector<float> f32;
  std::vector<double> f64;

  std::size_t count() const { return dtype == DType::kF32 ? f32.size() : f64.size(); }
  Shape shape() const { return Shape(dims.begin(), dims.end()); }
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Code { kBadMagic, kVersionMismatch, kCrcMismatch, kTruncated, kDuplicateKey, kKeyCollision };
  CheckpointError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

class Checkpoint {
 public:
  // Throws CheckpointError(kDuplicateKey) if the key exists.
  void add(std::string key, const Tensor& t);
  void add(std::string key, const Tensor64& t);
  void add(CheckpointEntry entry);

  const std::vector<CheckpointEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& key) const { return index_.count(key) != 0; }
  const CheckpointEntry* find(const std::string& key) const;
  // f64 entries are narrowed. Throws ConfigError when missing.
  Tensor tensor(const std::string& key) const;
  std::vector<std::string> keys() const;

  bool operator==(const Checkpoint& other) const;

 private:
  std::vector<CheckpointEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct SuffixRule {
  std::string from;
  std::string to;
};
// Rewrites each key with the first rule whose `from` is a suffix of it.
// Throws CheckpointError(kKeyCollision) naming the colliding keys.
Checkpoint remap_keys(const Checkpoint& ckpt, const std::vector<SuffixRule>& rules);
std::vector<SuffixRule> invert_rules(const std::vector<SuffixRule>& rules);

struct KeyRow {
  std::string key;
  Shape shape;
  std::size_t count = 0;
};
struct KeyTable {
  std::vector<KeyRow> rows;  // file order
  std::size_t total = 0;
  // Entries whose key ends in "weight_orig".
  std::size_t prunable_total = 0;
};
KeyTable list_keys(const Checkpoint& ckpt);

// Model bridging. Keys are the model's own names behind `prefix`; the
// generator config travels as the f64 entry "meta.generator_config".
inline constexpr const char* kGeneratorConfigKey = "meta.generator_config";
inline constexpr const char* kGroupSizeKey = "meta.group_size";

void store_config(Checkpoint& ckpt, const GeneratorConfig& config);
// Throws ConfigError when the entry is absent or malformed.
GeneratorConfig config_from_checkpoint(const Checkpoint& ckpt);

void store_generator(Checkpoint& ckpt, Generator& g, const std::string& prefix = "");
// Copies values into `g`. Throws ConfigError on any missing key or shape mismatch.
void load_generator(const Checkpoint& ckpt, Generator& g, const std::string& prefix = "");
void store_discriminator(Checkpoint& ckpt, Discriminator& d, const std::string& prefix = "D.");
void load_discriminator(const Checkpoint& ckpt, Discriminator& d, const std::string& prefix = "D.");

// Generator prefix present in the checkpoint: "G_copy." (the averaged copy of
// a training checkpoint), then "G.", then "".
std::string generator_prefix(const Checkpoint& ckpt);
Generator generator_from_checkpoint(const Checkpoint& ckpt);
// nullopt when the checkpoint carries no discriminator.
std::optional<Discriminator> discriminator_from_checkpoint(const Checkpoint& ckpt);

}  // namespace sglens
