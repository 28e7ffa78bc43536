#include "dvlr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dvlr/common.hpp"

namespace dvlr {

namespace {

constexpr std::string_view kMagic = "DVLRCKPT";

class Writer {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void block(const std::vector<double>& values) {
    for (double v : values) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n) {
    if (data_.size() - pos_ < n) fail(ErrorKind::format, "checkpoint truncated");
    const auto b = data_.substr(pos_, n);
    pos_ += n;
    return b;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void block(std::vector<double>& values, std::size_t n) {
    values.resize(n);
    for (auto& v : values) v = f64();
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::size_t block_size(const PolicyDims& d, int block) {
  const std::size_t K = d.K, D = d.d, H = d.H, V = d.V;
  switch (block) {
    case 0: return V * D;
    case 1: return K * D * H;
    case 2: return H;
    case 3: return H * V;
    default: return V;
  }
}

void write_params(Writer& w, const PolicyParameters& p) {
  w.u8(static_cast<std::uint8_t>(p.role));
  w.u32(static_cast<std::uint32_t>(p.dims.K));
  w.u32(static_cast<std::uint32_t>(p.dims.d));
  w.u32(static_cast<std::uint32_t>(p.dims.H));
  w.u32(static_cast<std::uint32_t>(p.dims.V));
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) w.block(p.w.block(b));
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt, const Vocabulary& vocab) {
  const auto& p = ckpt.params;
  if (p.dims.V != vocab.size()) fail(ErrorKind::contract, "policy vocabulary size does not match vocabulary");
  Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(p.role));
  const auto& hash = vocab.content_hash();
  w.bytes(std::string_view(reinterpret_cast<const char*>(hash.data()), hash.size()));
  w.u32(static_cast<std::uint32_t>(p.dims.K));
  w.u32(static_cast<std::uint32_t>(p.dims.d));
  w.u32(static_cast<std::uint32_t>(p.dims.H));
  w.u32(static_cast<std::uint32_t>(p.dims.V));
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) w.block(p.w.block(b));
  const auto& o = ckpt.optimizer;
  w.u64(o.step);
  w.f64(o.learning_rate);
  w.f64(o.beta1);
  w.f64(o.beta2);
  w.f64(o.epsilon);
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) w.block(o.m.block(b));
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) w.block(o.v.block(b));
  w.u32(static_cast<std::uint32_t>(ckpt.provenance.size()));
  w.bytes(ckpt.provenance);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes, const Vocabulary& vocab) {
  Reader r(bytes);
  if (r.bytes(kMagic.size()) != kMagic) fail(ErrorKind::format, "not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::format, "checkpoint version " + std::to_string(version) + " unsupported (expected " +
                                std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  auto& p = ckpt.params;
  const std::uint8_t role = r.u8();
  if (role > 1) fail(ErrorKind::format, "bad role tag " + std::to_string(role));
  p.role = static_cast<Role>(role);
  const auto hash = r.bytes(32);
  if (std::memcmp(hash.data(), vocab.content_hash().data(), 32) != 0) {
    fail(ErrorKind::format, "checkpoint vocabulary hash does not match the current vocabulary");
  }
  p.dims.K = static_cast<int>(r.u32());
  p.dims.d = static_cast<int>(r.u32());
  p.dims.H = static_cast<int>(r.u32());
  p.dims.V = static_cast<int>(r.u32());
  if (p.dims.V != vocab.size() || p.dims.K < 1 || p.dims.d < 1 || p.dims.H < 1) {
    fail(ErrorKind::format, "checkpoint dims are inconsistent");
  }
  p.pad_id = vocab.pad_id();
  p.eos_id = vocab.eos_id();
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) r.block(p.w.block(b), block_size(p.dims, b));
  auto& o = ckpt.optimizer;
  o.step = r.u64();
  o.learning_rate = r.f64();
  o.beta1 = r.f64();
  o.beta2 = r.f64();
  o.epsilon = r.f64();
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) r.block(o.m.block(b), block_size(p.dims, b));
  for (int b = 0; b < ParamBlocks::kBlockCount; ++b) r.block(o.v.block(b), block_size(p.dims, b));
  const std::uint32_t n = r.u32();
  ckpt.provenance = std::string(r.bytes(n));
  if (!r.done()) fail(ErrorKind::format, "trailing bytes after checkpoint");
  return ckpt;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint, const Vocabulary& vocab) {
  write_file(path, encode_checkpoint(checkpoint, vocab));
}

Checkpoint load_checkpoint(const std::string& path, const Vocabulary& vocab) {
  const std::string bytes = read_file(path);
  try {
    return decode_checkpoint(bytes, vocab);
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

std::string parameter_hash(const PolicyParameters& params) {
  Writer w;
  write_params(w, params);
  return to_hex(sha256(w.take()));
}

}  // namespace dvlr
