#pragma once

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <variant>
#include <vector>

#include "stereoisp/adam.hpp"
#include "stereoisp/model.hpp"
#include "stereoisp/png_io.hpp"

namespace stereoisp {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char checkpoint_magic[4] = {'S', 'I', 'S', 'P'};
inline constexpr std::uint32_t checkpoint_version = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct CheckpointTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<float>, std::vector<double>> values;

  DType dtype() const { return values.index() == 0 ? DType::f32 : DType::f64; }
  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, values);
  }
  friend bool operator==(const CheckpointTensor&, const CheckpointTensor&) = default;
};

/// Binary tensor payload plus a JSON sidecar (config, optimizer scalars,
/// training metadata).
struct Checkpoint {
  std::vector<CheckpointTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  const CheckpointTensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

inline std::filesystem::path checkpoint_sidecar(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

namespace detail {

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  out.insert(out.end(), bytes, bytes + sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& data) : data_(data) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    unsigned char bytes[sizeof(U)];
    std::memcpy(bytes, data_.data() + pos_, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
    pos_ += sizeof(U);
    U value;
    std::memcpy(&value, bytes, sizeof(U));
    return value;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint is truncated");
  }
  const std::vector<unsigned char>& data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Layout: "SISP", u32 version, u32 tensor count, then per tensor: u16 name
/// length, UTF-8 name, u8 dtype, u8 rank, u32 dims, little-endian values.
inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<unsigned char> out(checkpoint_magic, checkpoint_magic + 4);
  detail::put_le<std::uint32_t>(out, checkpoint_version);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xffff) throw CheckpointError("tensor name too long: " + t.name);
    if (t.dims.size() > 0xff) throw CheckpointError("tensor rank too large: " + t.name);
    std::uint64_t expected = 1;
    for (auto d : t.dims) expected *= d;
    if (expected != t.size()) throw CheckpointError("tensor '" + t.name + "' dims do not match its values");
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<unsigned char>(t.dtype()));
    out.push_back(static_cast<unsigned char>(t.dims.size()));
    for (auto d : t.dims) detail::put_le<std::uint32_t>(out, d);
    std::visit([&](const auto& v) {
      for (const auto x : v) detail::put_le(out, x);
    }, t.values);
  }
  return out;
}

inline std::vector<CheckpointTensor> decode_checkpoint(const std::vector<unsigned char>& data) {
  detail::Reader in(data);
  if (data.size() < 4 || std::memcmp(data.data(), checkpoint_magic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  in.bytes(4);
  const auto version = in.get<std::uint32_t>();
  if (version != checkpoint_version) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(checkpoint_version) + ")");
  }
  const auto count = in.get<std::uint32_t>();
  std::vector<CheckpointTensor> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const auto name_len = in.get<std::uint16_t>();
    t.name = in.bytes(name_len);
    const auto dtype = in.get<std::uint8_t>();
    const auto rank = in.get<std::uint8_t>();
    std::uint64_t n = 1;
    for (int k = 0; k < rank; ++k) {
      t.dims.push_back(in.get<std::uint32_t>());
      n *= t.dims.back();
    }
    if (n > data.size()) throw CheckpointError("checkpoint is truncated");
    if (dtype == static_cast<std::uint8_t>(DType::f32)) {
      std::vector<float> v(n);
      for (auto& x : v) x = in.get<float>();
      t.values = std::move(v);
    } else if (dtype == static_cast<std::uint8_t>(DType::f64)) {
      std::vector<double> v(n);
      for (auto& x : v) x = in.get<double>();
      t.values = std::move(v);
    } else {
      throw CheckpointError("tensor '" + t.name + "' has unknown dtype code " + std::to_string(dtype));
    }
    tensors.push_back(std::move(t));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last tensor");
  return tensors;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint '" + path.string() + "'");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing checkpoint '" + path.string() + "'");
  }
  std::ofstream meta(checkpoint_sidecar(path));
  if (!meta) throw IoError("cannot write checkpoint metadata for '" + path.string() + "'");
  meta << ckpt.metadata.dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Checkpoint ckpt;
  ckpt.tensors = decode_checkpoint(bytes);
  const auto sidecar = checkpoint_sidecar(path);
  if (std::filesystem::exists(sidecar)) {
    std::ifstream meta(sidecar);
    try {
      ckpt.metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError("unreadable checkpoint metadata: " + std::string(e.what()));
    }
  }
  return ckpt;
}

// ---- model <-> checkpoint -------------------------------------------------

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"depth", c.depth}, {"width", c.width}, {"kernel", c.kernel}, {"ports", c.ports},
          {"noise_channel", c.noise_channel}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.depth = j.value("depth", c.depth);
  c.width = j.value("width", c.width);
  c.kernel = j.value("kernel", c.kernel);
  c.ports = j.value("ports", c.ports);
  c.noise_channel = j.value("noise_channel", c.noise_channel);
  return c;
}

template <typename T>
CheckpointTensor to_checkpoint_tensor(const std::string& name, const Tensor<T>& t) {
  const Shape& s = t.shape();
  CheckpointTensor out{name,
                       {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                        static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
                       std::vector<T>(t.values().begin(), t.values().end())};
  return out;
}

template <typename T>
void append_params(Checkpoint& ckpt, const ModelParams<T>& params, const std::string& prefix = "") {
  for (const auto& nt : params.named()) ckpt.tensors.push_back(to_checkpoint_tensor(prefix + nt.name, nt.tensor));
}

template <typename T>
void restore_tensor(const CheckpointTensor& src, Tensor<T>& dst) {
  const auto& v = std::get<std::vector<T>>(src.values);
  auto out = dst.mutable_values();
  if (v.size() != out.size()) throw CheckpointError("tensor '" + src.name + "' has the wrong size");
  std::copy(v.begin(), v.end(), out.begin());
}

/// Rebuilds parameters stored under `prefix`; the architecture comes from
/// `config`, which must match the stored tensors.
template <typename T>
ModelParams<T> restore_params(const Checkpoint& ckpt, const ModelConfig& config, const std::string& prefix = "") {
  ModelParams<T> params = build_model<T>(config, 0);
  for (auto& nt : params.named()) {
    const auto* src = ckpt.find(prefix + nt.name);
    if (!src) throw CheckpointError("checkpoint lacks tensor '" + prefix + nt.name + "'");
    if (!std::holds_alternative<std::vector<T>>(src->values)) {
      throw CheckpointError("tensor '" + src->name + "' has a different dtype");
    }
    const Shape& s = nt.tensor.shape();
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    if (src->dims != dims) throw CheckpointError("tensor '" + src->name + "' shape does not match the model config");
    restore_tensor(*src, nt.tensor);
  }
  return params;
}

/// Model config recorded in a checkpoint's metadata.
inline ModelConfig checkpoint_model_config(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("model")) throw CheckpointError("checkpoint metadata lacks the model config");
  return model_config_from_json(ckpt.metadata["model"]);
}

template <typename T>
Checkpoint make_model_checkpoint(const ModelParams<T>& params, nlohmann::json metadata = nlohmann::json::object()) {
  Checkpoint ckpt;
  append_params(ckpt, params);
  metadata["model"] = to_json(params.config);
  metadata["format_version"] = checkpoint_version;
  ckpt.metadata = std::move(metadata);
  return ckpt;
}

template <typename T>
void append_adam(Checkpoint& ckpt, const AdamState<T>& state, const ModelParams<T>& params) {
  const auto names = params.named();
  std::size_t k = 0;
  for (const auto& nt : names) {
    if (!nt.trainable) continue;
    const std::vector<std::uint32_t> dims{static_cast<std::uint32_t>(state.m[k].size())};
    ckpt.tensors.push_back({"adam.m." + nt.name, dims, state.m[k]});
    ckpt.tensors.push_back({"adam.v." + nt.name, dims, state.v[k]});
    ++k;
  }
  ckpt.metadata["adam"] = {{"t", state.t}, {"beta1", state.beta1}, {"beta2", state.beta2}, {"eps", state.eps}};
}

template <typename T>
AdamState<T> restore_adam(const Checkpoint& ckpt, const ModelParams<T>& params) {
  if (!ckpt.metadata.contains("adam")) throw CheckpointError("checkpoint has no optimizer state");
  const auto& a = ckpt.metadata["adam"];
  AdamState<T> state = AdamState<T>::create(params.trainable(), a.at("beta1").get<double>(),
                                            a.at("beta2").get<double>(), a.at("eps").get<double>());
  state.t = a.at("t").get<std::int64_t>();
  std::size_t k = 0;
  for (const auto& nt : params.named()) {
    if (!nt.trainable) continue;
    for (auto [prefix, dst] : {std::pair{"adam.m.", &state.m[k]}, std::pair{"adam.v.", &state.v[k]}}) {
      const auto* src = ckpt.find(prefix + nt.name);
      if (!src) throw CheckpointError("checkpoint lacks optimizer tensor '" + std::string(prefix) + nt.name + "'");
      const auto& v = std::get<std::vector<T>>(src->values);
      if (v.size() != dst->size()) throw CheckpointError("optimizer tensor '" + src->name + "' has the wrong size");
      *dst = v;
    }
    ++k;
  }
  return state;
}

}  // namespace stereoisp
