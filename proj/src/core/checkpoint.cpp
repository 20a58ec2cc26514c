#include "core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace phg {

namespace {

constexpr char kMagic[4] = {'H', 'G', 'C', 'K'};
constexpr uint16_t kVersion = 1;
constexpr const char* kConfigPath = "__config__";

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  uint8_t u8() { return static_cast<uint8_t>(byte()); }
  uint16_t u16() { return static_cast<uint16_t>(byte()) | static_cast<uint16_t>(byte()) << 8; }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
    return v;
  }
  double f64() {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(byte()) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  uint8_t byte() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  void need(size_t n) {
    if (pos_ + n > data_.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::string data_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::string& config_json, const std::string& dtype) {
  if (dtype != "f64" && dtype != "f32")
    throw std::invalid_argument("save_checkpoint: dtype must be f64 or f32");
  uint8_t tag = dtype == "f64" ? 0 : 1;

  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u32(out, static_cast<uint32_t>(params.params.size()) + 1);

  // reserved config entry first
  put_u32(out, static_cast<uint32_t>(std::strlen(kConfigPath)));
  out.append(kConfigPath);
  out.push_back(2);
  put_u32(out, 1);
  put_u32(out, static_cast<uint32_t>(config_json.size()));
  out.append(config_json);

  for (const auto& [name, t] : params.params) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(tag));
    put_u32(out, 2);
    put_u32(out, static_cast<uint32_t>(t.rows()));
    put_u32(out, static_cast<uint32_t>(t.cols()));
    for (double v : t.values()) {
      if (tag == 0)
        put_f64(out, v);
      else
        put_f32(out, static_cast<float>(v));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));

  if (r.str(4) != std::string(kMagic, 4))
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  uint16_t version = r.u16();
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported format version " +
                             std::to_string(version));
  uint32_t count = r.u32();

  Checkpoint ck;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    CheckpointEntry e;
    e.dtype = r.u8();
    uint32_t ndims = r.u32();
    uint64_t total = 1;
    for (uint32_t d = 0; d < ndims; ++d) {
      e.dims.push_back(r.u32());
      total *= e.dims.back();
    }
    if (e.dtype == 2) {
      std::string raw = r.str(total);
      e.bytes.assign(raw.begin(), raw.end());
    } else if (e.dtype == 0) {
      e.scalars.resize(total);
      for (uint64_t k = 0; k < total; ++k) e.scalars[k] = r.f64();
    } else if (e.dtype == 1) {
      e.scalars.resize(total);
      for (uint64_t k = 0; k < total; ++k) e.scalars[k] = static_cast<double>(r.f32());
    } else {
      throw std::runtime_error("load_checkpoint: unknown dtype tag " + std::to_string(e.dtype));
    }
    if (name == kConfigPath)
      ck.config_json.assign(e.bytes.begin(), e.bytes.end());
    else
      ck.tensors.emplace(std::move(name), std::move(e));
  }
  if (!r.done()) throw std::runtime_error("load_checkpoint: trailing bytes in " + path);
  if (ck.config_json.empty())
    throw std::runtime_error("load_checkpoint: checkpoint carries no embedded config");
  return ck;
}

void fill_parameters(ParameterSet& params, const Checkpoint& ck) {
  for (auto& [name, t] : params.params) {
    auto it = ck.tensors.find(name);
    if (it == ck.tensors.end())
      throw std::runtime_error("checkpoint: missing tensor " + name);
    const CheckpointEntry& e = it->second;
    if (e.dims.size() != 2 || static_cast<int>(e.dims[0]) != t.rows() ||
        static_cast<int>(e.dims[1]) != t.cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name + " (file has " +
                               std::to_string(e.dims.size() == 2 ? e.dims[0] : 0) + "x" +
                               std::to_string(e.dims.size() == 2 ? e.dims[1] : 0) +
                               ", model expects " + std::to_string(t.rows()) + "x" +
                               std::to_string(t.cols()) + ")");
    t.values() = e.scalars;
  }
  for (const auto& [name, e] : ck.tensors)
    if (!params.has(name))
      throw std::runtime_error("checkpoint: unexpected tensor " + name +
                               " (config/checkpoint mismatch)");
}

}  // namespace phg
