#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlc/nn.hpp"
#include "vlc/optim.hpp"

namespace vlc {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'V', 'L', 'C', 'K', 'P', 'T', '\r', '\n'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

// Everything needed to resume or evaluate a run.
struct Checkpoint {
  std::string kind = "pretrain";
  std::uint64_t step = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> vocab;    // non-reserved words in id order
  std::vector<std::string> answers;  // fine-tuned answer set, if any
  std::vector<TensorRecord> tensors;
  std::uint64_t optimizer_steps = 0;
  std::vector<TensorRecord> optimizer;  // "m:<param>" and "v:<param>"

  const TensorRecord* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  std::string config_value(const std::string& key) const {
    for (const auto& [k, v] : config)
      if (k == key) return v;
    throw CheckpointError("checkpoint has no config entry " + key);
  }
};

namespace detail {

template <typename U>
U byteswap(U v) {
  U out{};
  for (std::size_t i = 0; i < sizeof(U); ++i) out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
  return out;
}

template <typename U>
void put_le(std::string& out, U v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <typename U>
U get_le(const char* p) {
  U v;
  std::memcpy(&v, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) v = byteswap(v);
  return v;
}

inline void put_floats(std::string& out, const std::vector<float>& data) {
  for (float f : data) put_le(out, std::bit_cast<std::uint32_t>(f));
}

}  // namespace detail

inline std::string serialize(const Checkpoint& ck) {
  using nlohmann::ordered_json;
  ordered_json header;
  header["kind"] = ck.kind;
  header["step"] = ck.step;
  header["rng"] = ck.rng_state;
  ordered_json cfg = ordered_json::array();
  for (const auto& [k, v] : ck.config) cfg.push_back({k, v});
  header["config"] = cfg;
  header["vocab"] = ck.vocab;
  header["answers"] = ck.answers;
  std::uint64_t offset = 0;
  auto describe = [&](const std::vector<TensorRecord>& records) {
    ordered_json arr = ordered_json::array();
    for (const auto& t : records) {
      if (numel(t.shape) != t.data.size()) throw CheckpointError("tensor " + t.name + " has inconsistent size");
      arr.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}});
      offset += t.data.size() * sizeof(float);
    }
    return arr;
  };
  header["tensors"] = describe(ck.tensors);
  header["optimizer_steps"] = ck.optimizer_steps;
  header["optimizer"] = describe(ck.optimizer);
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_le(out, kCheckpointVersion);
  detail::put_le(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  for (const auto& t : ck.tensors) detail::put_floats(out, t.data);
  for (const auto& t : ck.optimizer) detail::put_floats(out, t.data);
  return out;
}

inline Checkpoint deserialize(const std::string& bytes) {
  using nlohmann::json;
  const std::size_t fixed = sizeof(kCheckpointMagic) + 4 + 8;
  if (bytes.size() < fixed || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = detail::get_le<std::uint64_t>(bytes.data() + 12);
  if (header_len > bytes.size() - fixed) throw CheckpointError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.begin() + fixed, bytes.begin() + static_cast<std::ptrdiff_t>(fixed + header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::size_t payload = fixed + header_len;

  Checkpoint ck;
  try {
    ck.kind = header.at("kind").get<std::string>();
    ck.step = header.at("step").get<std::uint64_t>();
    ck.rng_state = header.at("rng").get<std::string>();
    for (const auto& kv : header.at("config")) ck.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    ck.vocab = header.at("vocab").get<std::vector<std::string>>();
    ck.answers = header.at("answers").get<std::vector<std::string>>();
    ck.optimizer_steps = header.at("optimizer_steps").get<std::uint64_t>();
    auto read = [&](const json& arr, std::vector<TensorRecord>& out) {
      for (const auto& entry : arr) {
        TensorRecord t;
        t.name = entry.at("name").get<std::string>();
        t.shape = entry.at("shape").get<Shape>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const std::size_t count = numel(t.shape);
        if (offset > bytes.size() - payload || count * sizeof(float) > bytes.size() - payload - offset) {
          throw CheckpointError("tensor " + t.name + " extends past the end of the file");
        }
        const char* p = bytes.data() + payload + offset;
        t.data.resize(count);
        for (std::size_t i = 0; i < count; ++i)
          t.data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(p + i * sizeof(float)));
        out.push_back(std::move(t));
      }
    };
    read(header.at("tensors"), ck.tensors);
    read(header.at("optimizer"), ck.optimizer);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

// Atomic write: a sibling temp file is renamed over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_atomic(path, serialize(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

template <typename T>
std::vector<TensorRecord> capture(const ParamList<T>& params) {
  std::vector<TensorRecord> out;
  for (const auto& p : params) {
    auto d = p.tensor->data();
    out.push_back({p.name, p.tensor->shape(), std::vector<float>(d.begin(), d.end())});
  }
  return out;
}

// Copies stored tensors into `params`. Every parameter must be present with
// the same shape.
template <typename T>
void restore(const Checkpoint& ck, ParamList<T>& params) {
  for (auto& p : params) {
    const auto* rec = ck.find(p.name);
    if (!rec) throw CheckpointError("checkpoint is missing parameter " + p.name);
    if (rec->shape != p.tensor->shape()) {
      throw CheckpointError("parameter " + p.name + " has shape " + to_string(rec->shape) + " in the checkpoint but " +
                            to_string(p.tensor->shape()) + " in the model");
    }
    auto dst = p.tensor->mutable_data();
    std::copy(rec->data.begin(), rec->data.end(), dst.begin());
  }
}

template <typename T>
void capture_optimizer(Checkpoint& ck, const AdamW<T>& opt, const ParamList<T>& params) {
  ck.optimizer.clear();
  ck.optimizer_steps = opt.steps_taken();
  const auto& m = opt.first_moments();
  const auto& v = opt.second_moments();
  if (m.empty()) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].tensor->shape();
    ck.optimizer.push_back({"m:" + params[i].name, shape, std::vector<float>(m[i].begin(), m[i].end())});
    ck.optimizer.push_back({"v:" + params[i].name, shape, std::vector<float>(v[i].begin(), v[i].end())});
  }
}

template <typename T>
void restore_optimizer(const Checkpoint& ck, AdamW<T>& opt, const ParamList<T>& params) {
  if (ck.optimizer.empty()) {
    opt.restore(ck.optimizer_steps, {}, {});
    return;
  }
  if (ck.optimizer.size() != 2 * params.size()) throw CheckpointError("optimizer state does not match the parameter list");
  std::vector<std::vector<T>> m, v;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& rm = ck.optimizer[2 * i];
    const auto& rv = ck.optimizer[2 * i + 1];
    if (rm.name != "m:" + params[i].name || rv.name != "v:" + params[i].name || rm.shape != params[i].tensor->shape()) {
      throw CheckpointError("optimizer state for " + params[i].name + " is missing or misshapen");
    }
    m.emplace_back(rm.data.begin(), rm.data.end());
    v.emplace_back(rv.data.begin(), rv.data.end());
  }
  opt.restore(ck.optimizer_steps, std::move(m), std::move(v));
}

}  // namespace vlc
