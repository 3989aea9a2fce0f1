#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "vlc/model.hpp"
#include "vlc/optim.hpp"
#include "vlc/pretrain.hpp"

namespace vlc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Every run setting. Defaults describe the small synthetic setup.
struct RunConfig {
  // model
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t patch = 8;
  std::size_t layers = 4;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t text_len = 8;
  std::size_t decoder_layers = 2;
  std::size_t decoder_width = 32;
  std::size_t decoder_heads = 4;
  double ln_eps = 1e-6;
  // masking and losses
  double image_mask_ratio = 0.6;
  double text_mask_prob = 0.15;
  bool bert_mix = false;
  bool loss_mlm = true;
  bool loss_mim = true;
  bool loss_itm = true;
  bool normalize_pixels = false;
  double itm_swap_prob = 0.5;
  // optimization
  double lr = 1e-4;
  double finetune_lr = 5e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.1;
  double layer_decay = 0.5;
  std::size_t steps = 2000;
  std::size_t batch_size = 32;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;
  std::size_t seed = 0;
  // data
  std::string data_source = "synthetic";
  std::size_t synthetic_count = 256;
  std::size_t data_seed = 1;
  std::size_t eval_count = 100;
  std::size_t eval_seed = 2;
  std::string manifest;
  std::string image_root;
  std::size_t vocab_min_count = 1;
  // fine-tuning and probing
  std::string init;
  std::string answers;
  std::size_t retrieval_negatives = 15;
  std::size_t probe_k = 4;
  std::size_t probe_image = 0;
  std::string probe_word;
  std::string probe_nouns;
  std::size_t probe_bins = 20;

  ModelConfig model(std::size_t vocab_size) const {
    ModelConfig m;
    m.image_size = image_size;
    m.channels = channels;
    m.patch = patch;
    m.vocab_size = vocab_size;
    m.encoder.layers = layers;
    m.encoder.width = width;
    m.encoder.heads = heads;
    m.encoder.mlp_ratio = mlp_ratio;
    m.encoder.n_max = m.num_patches();
    m.encoder.m_max = text_len;
    m.decoder_layers = decoder_layers;
    m.decoder_width = decoder_width;
    m.decoder_heads = decoder_heads;
    m.ln_eps = ln_eps;
    return m;
  }

  PretrainOptions pretrain_options() const {
    PretrainOptions o;
    o.masking.image_ratio = image_mask_ratio;
    o.masking.text_prob = text_mask_prob;
    o.masking.bert_mix = bert_mix;
    o.itm_swap_prob = itm_swap_prob;
    o.use_mlm = loss_mlm;
    o.use_mim = loss_mim;
    o.use_itm = loss_itm;
    o.normalize_pixel_targets = normalize_pixels;
    return o;
  }

  AdamWConfig adamw() const { return {beta1, beta2, adam_eps, weight_decay}; }
  Schedule schedule() const { return {lr, steps, warmup_fraction}; }
  Schedule finetune_schedule() const { return {finetune_lr, steps, warmup_fraction}; }
};

namespace detail {

using FieldRef = std::variant<std::size_t RunConfig::*, double RunConfig::*, bool RunConfig::*, std::string RunConfig::*>;

struct Field {
  const char* key;
  FieldRef member;
};

inline const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      {"model.image_size", &RunConfig::image_size},
      {"model.channels", &RunConfig::channels},
      {"model.patch", &RunConfig::patch},
      {"model.layers", &RunConfig::layers},
      {"model.width", &RunConfig::width},
      {"model.heads", &RunConfig::heads},
      {"model.mlp_ratio", &RunConfig::mlp_ratio},
      {"model.text_len", &RunConfig::text_len},
      {"model.decoder_layers", &RunConfig::decoder_layers},
      {"model.decoder_width", &RunConfig::decoder_width},
      {"model.decoder_heads", &RunConfig::decoder_heads},
      {"model.ln_eps", &RunConfig::ln_eps},
      {"mask.image_ratio", &RunConfig::image_mask_ratio},
      {"mask.text_prob", &RunConfig::text_mask_prob},
      {"mask.bert_mix", &RunConfig::bert_mix},
      {"loss.mlm", &RunConfig::loss_mlm},
      {"loss.mim", &RunConfig::loss_mim},
      {"loss.itm", &RunConfig::loss_itm},
      {"loss.normalize_pixels", &RunConfig::normalize_pixels},
      {"loss.itm_swap_prob", &RunConfig::itm_swap_prob},
      {"optim.lr", &RunConfig::lr},
      {"optim.finetune_lr", &RunConfig::finetune_lr},
      {"optim.weight_decay", &RunConfig::weight_decay},
      {"optim.beta1", &RunConfig::beta1},
      {"optim.beta2", &RunConfig::beta2},
      {"optim.eps", &RunConfig::adam_eps},
      {"optim.warmup_fraction", &RunConfig::warmup_fraction},
      {"optim.layer_decay", &RunConfig::layer_decay},
      {"train.steps", &RunConfig::steps},
      {"train.batch_size", &RunConfig::batch_size},
      {"train.log_every", &RunConfig::log_every},
      {"train.checkpoint_every", &RunConfig::checkpoint_every},
      {"train.seed", &RunConfig::seed},
      {"data.source", &RunConfig::data_source},
      {"data.synthetic_count", &RunConfig::synthetic_count},
      {"data.synthetic_seed", &RunConfig::data_seed},
      {"data.eval_count", &RunConfig::eval_count},
      {"data.eval_seed", &RunConfig::eval_seed},
      {"data.manifest", &RunConfig::manifest},
      {"data.image_root", &RunConfig::image_root},
      {"data.vocab_min_count", &RunConfig::vocab_min_count},
      {"train.init", &RunConfig::init},
      {"finetune.answers", &RunConfig::answers},
      {"finetune.retrieval_negatives", &RunConfig::retrieval_negatives},
      {"probe.k", &RunConfig::probe_k},
      {"probe.image", &RunConfig::probe_image},
      {"probe.word", &RunConfig::probe_word},
      {"probe.nouns", &RunConfig::probe_nouns},
      {"probe.bins", &RunConfig::probe_bins},
  };
  return fields;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename Int>
Int parse_unsigned(const std::string& key, const std::string& v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty() || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

// Sets one field by its dotted key.
inline void set_field(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : detail::schema()) {
    if (key != f.key) continue;
    std::visit(
        [&](auto member) {
          using V = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<V, std::size_t>) {
            cfg.*member = detail::parse_unsigned<V>(key, value);
          } else if constexpr (std::is_same_v<V, double>) {
            cfg.*member = detail::parse_double(key, value);
          } else if constexpr (std::is_same_v<V, bool>) {
            cfg.*member = detail::parse_bool(key, value);
          } else {
            cfg.*member = value;
          }
        },
        f.member);
    return;
  }
  throw ConfigError(key, "unknown setting");
}

inline std::string get_field(const RunConfig& cfg, const std::string& key) {
  for (const auto& f : detail::schema()) {
    if (key != f.key) continue;
    return std::visit(
        [&](auto member) -> std::string {
          using V = std::remove_cvref_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<V, double>) {
            return detail::format_double(cfg.*member);
          } else if constexpr (std::is_same_v<V, bool>) {
            return cfg.*member ? "true" : "false";
          } else if constexpr (std::is_same_v<V, std::string>) {
            return cfg.*member;
          } else {
            return std::to_string(cfg.*member);
          }
        },
        f.member);
  }
  throw ConfigError(key, "unknown setting");
}

// Every setting as (key, value) in schema order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : detail::schema()) out.emplace_back(f.key, get_field(cfg, f.key));
  return out;
}

inline std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

// Range checks that the parser alone cannot express.
inline void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* key, const std::string& msg) {
    if (!ok) throw ConfigError(key, msg);
  };
  require(c.patch > 0 && c.image_size % c.patch == 0, "model.patch",
          "image size " + std::to_string(c.image_size) + " is not divisible by patch " + std::to_string(c.patch));
  require(c.channels == 1 || c.channels == 3, "model.channels", "must be 1 or 3");
  require(c.width > 0, "model.width", "must be positive");
  require(c.heads > 0 && c.width % c.heads == 0, "model.heads", "must divide model.width");
  require(c.mlp_ratio > 0, "model.mlp_ratio", "must be positive");
  require(c.text_len >= 2, "model.text_len", "must be at least 2 (CLS plus one word)");
  require(c.decoder_heads > 0 && c.decoder_width % c.decoder_heads == 0, "model.decoder_heads",
          "must divide model.decoder_width");
  require(c.ln_eps > 0, "model.ln_eps", "must be positive");
  require(c.image_mask_ratio >= 0 && c.image_mask_ratio < 1, "mask.image_ratio", "must lie in [0, 1)");
  require(c.text_mask_prob >= 0 && c.text_mask_prob <= 1, "mask.text_prob", "must lie in [0, 1]");
  require(c.itm_swap_prob >= 0 && c.itm_swap_prob <= 1, "loss.itm_swap_prob", "must lie in [0, 1]");
  require(c.loss_mlm || c.loss_mim || c.loss_itm, "loss", "at least one objective must be enabled");
  require(!c.loss_mim || c.image_mask_ratio > 0, "mask.image_ratio", "must be positive while loss.mim is on");
  require(!c.loss_mlm || c.text_mask_prob > 0, "mask.text_prob", "must be positive while loss.mlm is on");
  require(c.lr >= 0, "optim.lr", "must be non-negative");
  require(c.finetune_lr >= 0, "optim.finetune_lr", "must be non-negative");
  require(c.weight_decay >= 0, "optim.weight_decay", "must be non-negative");
  require(c.beta1 >= 0 && c.beta1 < 1, "optim.beta1", "must lie in [0, 1)");
  require(c.beta2 >= 0 && c.beta2 < 1, "optim.beta2", "must lie in [0, 1)");
  require(c.adam_eps > 0, "optim.eps", "must be positive");
  require(c.warmup_fraction >= 0 && c.warmup_fraction <= 1, "optim.warmup_fraction", "must lie in [0, 1]");
  require(c.layer_decay > 0 && c.layer_decay <= 1, "optim.layer_decay", "must lie in (0, 1]");
  require(c.batch_size > 0, "train.batch_size", "must be positive");
  require(c.data_source == "synthetic" || c.data_source == "jsonl", "data.source", "must be synthetic or jsonl");
  require(c.data_source != "jsonl" || !c.manifest.empty(), "data.manifest", "required when data.source = jsonl");
  require(c.data_source != "synthetic" || c.synthetic_count > 0, "data.synthetic_count", "must be positive");
  require(c.retrieval_negatives > 0, "finetune.retrieval_negatives", "must be at least 1");
  require(c.probe_k > 0, "probe.k", "must be positive");
  require(c.probe_bins > 0, "probe.bins", "must be positive");
}

// key = value lines; '#' starts a comment. Errors carry the field path and line.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    try {
      set_field(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(e.field(), std::string(e.what()).substr(e.field().size() + 2) + " (line " +
                                       std::to_string(lineno) + ")");
    }
  }
  validate(cfg);
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  return parse_config(in, std::move(base));
}

}  // namespace vlc
