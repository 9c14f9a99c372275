#include "sglens/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include "sglens/error.hpp"
#include "sglens/image_io.hpp"

namespace sglens {

namespace {

using Code = CheckpointError::Code;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, std::size_t end) : b_(b), end_(end) {}
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw CheckpointError(Code::kTruncated, "checkpoint is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return end_ - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint32_t> dims_of(const Shape& s) {
  std::vector<std::uint32_t> d;
  for (std::size_t v : s) d.push_back(static_cast<std::uint32_t>(v));
  return d;
}

void copy_into(const CheckpointEntry& e, Tensor& dst, const std::string& what) {
  if (e.shape() != dst.shape())
    throw ConfigError(what + ": checkpoint shape " + shape_str(e.shape()) + " does not match model shape " +
                      shape_str(dst.shape()));
  auto out = dst.mutable_data();
  if (e.dtype == DType::kF32)
    std::copy(e.f32.begin(), e.f32.end(), out.begin());
  else
    std::transform(e.f64.begin(), e.f64.end(), out.begin(), [](double v) { return static_cast<float>(v); });
}

void load_named(const Checkpoint& ckpt, const std::vector<NamedParam>& params, const std::string& prefix) {
  for (const auto& p : params) {
    const auto* e = ckpt.find(prefix + p.key);
    if (e == nullptr) throw ConfigError("checkpoint lacks key " + prefix + p.key);
    Tensor t = p.tensor;
    copy_into(*e, t, prefix + p.key);
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void Checkpoint::add(std::string key, const Tensor& t) {
  CheckpointEntry e;
  e.key = std::move(key);
  e.dims = dims_of(t.shape());
  e.dtype = DType::kF32;
  e.f32.assign(t.data().begin(), t.data().end());
  add(std::move(e));
}

void Checkpoint::add(std::string key, const Tensor64& t) {
  CheckpointEntry e;
  e.key = std::move(key);
  e.dims = dims_of(t.shape());
  e.dtype = DType::kF64;
  e.f64.assign(t.data().begin(), t.data().end());
  add(std::move(e));
}

void Checkpoint::add(CheckpointEntry entry) {
  if (index_.count(entry.key) != 0) throw CheckpointError(Code::kDuplicateKey, "duplicate checkpoint key " + entry.key);
  index_[entry.key] = entries_.size();
  entries_.push_back(std::move(entry));
}

const CheckpointEntry* Checkpoint::find(const std::string& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

Tensor Checkpoint::tensor(const std::string& key) const {
  const auto* e = find(key);
  if (e == nullptr) throw ConfigError("checkpoint lacks key " + key);
  Tensor t(e->shape());
  copy_into(*e, t, key);
  return t;
}

std::vector<std::string> Checkpoint::keys() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.key);
  return out;
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.key != b.key || a.dims != b.dims || a.dtype != b.dtype) return false;
    // bitwise, so NaN payloads and signed zeros count
    if (a.f32.size() != b.f32.size() || a.f64.size() != b.f64.size()) return false;
    if (std::memcmp(a.f32.data(), b.f32.data(), a.f32.size() * sizeof(float)) != 0) return false;
    if (std::memcmp(a.f64.data(), b.f64.data(), a.f64.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("SGLN", 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(ckpt.size()));
  for (const auto& e : ckpt.entries()) {
    w.u32(static_cast<std::uint32_t>(e.key.size()));
    w.bytes(e.key.data(), e.key.size());
    w.u8(static_cast<std::uint8_t>(e.dtype));
    w.u32(static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) w.u32(d);
    if (e.dtype == DType::kF32)
      for (float v : e.f32) w.u32(std::bit_cast<std::uint32_t>(v));
    else
      for (double v : e.f64) w.u64(std::bit_cast<std::uint64_t>(v));
  }
  w.u32(crc_of(w.out()));
  return std::move(w.out());
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw CheckpointError(Code::kTruncated, "checkpoint is truncated");
  if (std::memcmp(bytes.data(), "SGLN", 4) != 0) throw CheckpointError(Code::kBadMagic, "not a checkpoint (bad magic)");
  if (bytes.size() < 16) throw CheckpointError(Code::kTruncated, "checkpoint is truncated");
  Reader r(bytes, bytes.size() - 4);
  r.str(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(Code::kVersionMismatch, "checkpoint version " + std::to_string(version) +
                                                      " is not supported (expected " +
                                                      std::to_string(kCheckpointVersion) + ")");
  const std::uint32_t count = r.u32();
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.key = r.str(r.u32());
    const std::uint8_t tag = r.u8();
    if (tag > 1) {
      // an unknown tag means the bytes are damaged; let the checksum decide how to report it
      if (crc_of(bytes.first(bytes.size() - 4)) != Reader(bytes.last(4), 4).u32())
        throw CheckpointError(Code::kCrcMismatch, "checkpoint CRC mismatch");
      throw CheckpointError(Code::kVersionMismatch, "unknown dtype tag " + std::to_string(tag));
    }
    e.dtype = static_cast<DType>(tag);
    const std::uint32_t rank = r.u32();
    r.need(std::size_t{rank} * 4);
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.u32());
      n *= e.dims.back();
    }
    const std::size_t width = e.dtype == DType::kF32 ? 4 : 8;
    if (n > r.remaining() / width) throw CheckpointError(Code::kTruncated, "checkpoint is truncated");
    if (e.dtype == DType::kF32) {
      e.f32.resize(n);
      for (auto& v : e.f32) v = std::bit_cast<float>(r.u32());
    } else {
      e.f64.resize(n);
      for (auto& v : e.f64) v = std::bit_cast<double>(r.u64());
    }
    ckpt.add(std::move(e));
  }
  if (r.remaining() != 0) throw CheckpointError(Code::kCrcMismatch, "checkpoint has trailing bytes");
  if (crc_of(bytes.first(bytes.size() - 4)) != Reader(bytes.last(4), 4).u32())
    throw CheckpointError(Code::kCrcMismatch, "checkpoint CRC mismatch");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path)); }

Checkpoint remap_keys(const Checkpoint& ckpt, const std::vector<SuffixRule>& rules) {
  std::vector<std::string> renamed;
  std::map<std::string, std::vector<std::string>> sources;
  for (const auto& e : ckpt.entries()) {
    std::string key = e.key;
    for (const auto& rule : rules) {
      if (!rule.from.empty() && ends_with(key, rule.from)) {
        key = key.substr(0, key.size() - rule.from.size()) + rule.to;
        break;
      }
    }
    sources[key].push_back(e.key);
    renamed.push_back(std::move(key));
  }
  std::string clashes;
  for (const auto& [target, from] : sources) {
    if (from.size() < 2) continue;
    clashes += "\n  " + target + " <-";
    for (const auto& f : from) clashes += " " + f;
  }
  if (!clashes.empty()) throw CheckpointError(Code::kKeyCollision, "key remap collides:" + clashes);
  Checkpoint out;
  for (std::size_t i = 0; i < renamed.size(); ++i) {
    CheckpointEntry e = ckpt.entries()[i];
    e.key = renamed[i];
    out.add(std::move(e));
  }
  return out;
}

std::vector<SuffixRule> invert_rules(const std::vector<SuffixRule>& rules) {
  std::vector<SuffixRule> out;
  for (const auto& r : rules) out.push_back({r.to, r.from});
  return out;
}

KeyTable list_keys(const Checkpoint& ckpt) {
  KeyTable table;
  for (const auto& e : ckpt.entries()) {
    table.rows.push_back({e.key, e.shape(), e.count()});
    table.total += e.count();
    if (ends_with(e.key, "weight_orig")) table.prunable_total += e.count();
  }
  return table;
}

void store_config(Checkpoint& ckpt, const GeneratorConfig& c) {
  std::vector<double> v{1.0,
                        static_cast<double>(c.latent_size),
                        static_cast<double>(c.n_layers),
                        static_cast<double>(c.img_channels),
                        static_cast<double>(c.min_res),
                        static_cast<double>(c.blocks),
                        static_cast<double>(c.max_res),
                        c.leaky_slope,
                        c.truncation_psi,
                        static_cast<double>(c.truncation_cutoff),
                        c.w_avg_decay};
  for (std::size_t w : c.channel_widths()) v.push_back(static_cast<double>(w));
  const std::size_t n = v.size();
  ckpt.add(kGeneratorConfigKey, Tensor64(Shape{n}, std::move(v)));
}

GeneratorConfig config_from_checkpoint(const Checkpoint& ckpt) {
  const auto* e = ckpt.find(kGeneratorConfigKey);
  if (e == nullptr || e->dtype != DType::kF64 || e->f64.size() < 11 || e->f64[0] != 1.0)
    throw ConfigError("checkpoint carries no readable generator config");
  const auto& v = e->f64;
  auto size = [](double x) { return static_cast<std::size_t>(x); };
  GeneratorConfig c;
  c.latent_size = size(v[1]);
  c.n_layers = size(v[2]);
  c.img_channels = size(v[3]);
  c.min_res = size(v[4]);
  c.blocks = size(v[5]);
  c.max_res = size(v[6]);
  c.leaky_slope = v[7];
  c.truncation_psi = v[8];
  c.truncation_cutoff = static_cast<int>(v[9]);
  c.w_avg_decay = v[10];
  for (std::size_t i = 11; i < v.size(); ++i) c.channels.push_back(size(v[i]));
  c.validate();
  return c;
}

void store_generator(Checkpoint& ckpt, Generator& g, const std::string& prefix) {
  for (const auto& p : g.named_parameters()) ckpt.add(prefix + p.key, p.tensor);
  for (const auto& p : g.named_buffers()) ckpt.add(prefix + p.key, p.tensor);
}

void load_generator(const Checkpoint& ckpt, Generator& g, const std::string& prefix) {
  load_named(ckpt, g.named_parameters(), prefix);
  load_named(ckpt, g.named_buffers(), prefix);
}

void store_discriminator(Checkpoint& ckpt, Discriminator& d, const std::string& prefix) {
  for (const auto& p : d.named_parameters()) ckpt.add(prefix + p.key, p.tensor);
}

void load_discriminator(const Checkpoint& ckpt, Discriminator& d, const std::string& prefix) {
  load_named(ckpt, d.named_parameters(), prefix);
}

std::string generator_prefix(const Checkpoint& ckpt) {
  for (const char* prefix : {"G_copy.", "G."})
    if (ckpt.contains(std::string(prefix) + "Src_Net.const")) return prefix;
  return "";
}

Generator generator_from_checkpoint(const Checkpoint& ckpt) {
  Generator g(config_from_checkpoint(ckpt));
  load_generator(ckpt, g, generator_prefix(ckpt));
  return g;
}

std::optional<Discriminator> discriminator_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.contains("D.out.bias")) return std::nullopt;
  std::size_t group = 8;
  if (const auto* e = ckpt.find(kGroupSizeKey); e != nullptr && e->count() == 1)
    group = static_cast<std::size_t>(e->dtype == DType::kF64 ? e->f64[0] : e->f32[0]);
  Discriminator d(config_from_checkpoint(ckpt), group);
  load_discriminator(ckpt, d);
  return d;
}

}  // namespace sglens
