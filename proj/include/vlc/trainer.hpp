#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vlc/checkpoint.hpp"
#include "vlc/config.hpp"
#include "vlc/data/dataset.hpp"
#include "vlc/data/synthetic.hpp"
#include "vlc/eval.hpp"
#include "vlc/finetune.hpp"
#include "vlc/optim.hpp"
#include "vlc/pretrain.hpp"

namespace vlc {

// Training items plus a held-out set. Synthetic runs also keep the generator
// specs, which the fine-tuning tasks and probes use as ground truth.
struct RunData {
  std::vector<data::CaptionedImage> train;
  std::vector<data::CaptionedImage> eval;
  std::vector<data::SyntheticSpec> train_specs;
  std::vector<data::SyntheticSpec> eval_specs;
  std::vector<data::LoadError> errors;

  bool synthetic() const { return !train_specs.empty(); }
};

inline data::SyntheticConfig synthetic_config(const RunConfig& c) {
  data::SyntheticConfig s;
  s.size = c.image_size;
  s.channels = c.channels;
  return s;
}

// JSONL sources hold out their last eval_count items when there are enough.
inline RunData load_run_data(const RunConfig& c) {
  RunData out;
  if (c.data_source == "synthetic") {
    for (auto& s : data::generate_synthetic(c.synthetic_count, c.data_seed, synthetic_config(c))) {
      out.train.push_back(std::move(s.item));
      out.train_specs.push_back(s.spec);
    }
    for (auto& s : data::generate_synthetic(c.eval_count, c.eval_seed, synthetic_config(c))) {
      out.eval.push_back(std::move(s.item));
      out.eval_specs.push_back(s.spec);
    }
    return out;
  }
  const std::filesystem::path root = c.image_root.empty() ? data::default_data_root() : std::filesystem::path(c.image_root);
  auto loaded = data::load_jsonl(c.manifest, root, c.image_size, c.image_size, c.channels);
  if (loaded.items.empty()) throw std::runtime_error("no usable items in " + c.manifest);
  out.errors = std::move(loaded.errors);
  out.train = std::move(loaded.items);
  if (c.eval_count > 0 && c.eval_count < out.train.size()) {
    out.eval.assign(out.train.end() - static_cast<std::ptrdiff_t>(c.eval_count), out.train.end());
    out.train.resize(out.train.size() - c.eval_count);
  } else {
    out.eval = out.train;
  }
  return out;
}

// Synthetic runs add the fine-tuning prompts to the vocabulary corpus so the
// pretrained embedding table already has rows for them.
inline data::Vocab build_run_vocab(const RunData& d, const RunConfig& c) {
  std::vector<std::string> corpus;
  for (const auto& item : d.train) corpus.push_back(item.caption);
  if (d.synthetic())
    for (auto& p : task_prompts()) corpus.push_back(std::move(p));
  return data::build_vocab(corpus, c.vocab_min_count);
}

using Metrics = std::vector<std::pair<std::string, double>>;

inline std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void write_metrics(const std::filesystem::path& path, const Metrics& metrics) {
  std::string text = "metric\tvalue\n";
  for (const auto& [k, v] : metrics) text += k + "\t" + format_value(v) + "\n";
  write_file_atomic(path, text);
}

inline Metrics read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  Metrics out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    out.emplace_back(line.substr(0, tab), std::stod(line.substr(tab + 1)));
  }
  return out;
}

// Human-readable progress log, optionally echoed to stderr.
class RunLog {
 public:
  RunLog() = default;
  RunLog(const std::filesystem::path& path, bool echo) : echo_(echo) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    file_.open(path, std::ios::app);
    if (!file_) throw std::runtime_error("cannot open log " + path.string());
  }

  void line(const std::string& text) {
    if (file_.is_open()) file_ << text << '\n' << std::flush;
    if (echo_) std::cerr << text << '\n';
  }

 private:
  std::ofstream file_;
  bool echo_ = false;
};

struct StepStats {
  std::size_t step = 0;
  double lr = 0;
  double total = 0;
  double mlm = 0;
  double mim = 0;
  double itm = 0;
};

inline std::string describe(const StepStats& s) {
  std::ostringstream os;
  os << "step " << s.step << " lr " << format_value(s.lr) << " loss " << format_value(s.total) << " mlm "
     << format_value(s.mlm) << " mim " << format_value(s.mim) << " itm " << format_value(s.itm);
  return os.str();
}

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw CheckpointError("corrupt random-generator state in checkpoint");
}

// Per-epoch shuffled order derived from (seed, epoch), so the batch of any
// step is known without replaying earlier ones.
inline std::vector<std::size_t> epoch_batch(std::size_t n, std::size_t batch_size, std::size_t seed, std::size_t step) {
  const std::size_t b = std::min(batch_size, n);
  const std::size_t per_epoch = n / b;
  const std::size_t epoch = step / per_epoch, k = step % per_epoch;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32), 0x62617463u};
  Rng rng(seq);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return {order.begin() + static_cast<std::ptrdiff_t>(k * b), order.begin() + static_cast<std::ptrdiff_t>((k + 1) * b)};
}

// Config keys that fix the parameter shapes.
inline const std::vector<std::string>& architecture_keys() {
  static const std::vector<std::string> keys = {"model.image_size", "model.channels", "model.patch",
                                                "model.layers",     "model.width",    "model.heads",
                                                "model.mlp_ratio",  "model.text_len", "model.decoder_layers",
                                                "model.decoder_width", "model.decoder_heads"};
  return keys;
}

inline void check_compatible(const Checkpoint& ck, const RunConfig& cfg) {
  for (const auto& key : architecture_keys()) {
    const auto ours = get_field(cfg, key);
    const auto theirs = ck.config_value(key);
    if (ours != theirs) {
      throw CheckpointError("incompatible checkpoint: " + key + " is " + theirs + " in the checkpoint but " + ours +
                            " in the config");
    }
  }
}

// Rebuilds a run config from a checkpoint's snapshot.
inline RunConfig config_from(const Checkpoint& ck) {
  RunConfig cfg;
  for (const auto& [k, v] : ck.config) set_field(cfg, k, v);
  return cfg;
}

enum class PretrainMode { kJoint, kMimOnly };

inline const char* kind_name(PretrainMode m) { return m == PretrainMode::kJoint ? "pretrain" : "pretrain-mim"; }

// Owns the model, optimizer and random state of one pretraining run.
class Pretrainer {
 public:
  Pretrainer(RunConfig cfg, std::vector<data::CaptionedImage> items, data::Vocab vocab,
             PretrainMode mode = PretrainMode::kJoint)
      : cfg_(std::move(cfg)),
        vocab_(std::move(vocab)),
        mode_(mode),
        model_(cfg_.model(vocab_.size()), cfg_.seed),
        opt_(cfg_.adamw()),
        schedule_(cfg_.schedule()) {
    validate(cfg_);
    if (items.empty()) throw std::invalid_argument("pretraining needs at least one item");
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32), 0x6d61736bu};
    rng_.seed(seq);
    all_ = make_batch(std::span<const data::CaptionedImage>(items), vocab_, cfg_.text_len, cfg_.patch);
    params_ = trainable();
  }

  VlcModel<float>& model() { return model_; }
  const VlcModel<float>& model() const { return model_; }
  const data::Vocab& vocab() const { return vocab_; }
  const RunConfig& config() const { return cfg_; }
  const MultimodalBatch& data() const { return all_; }
  std::size_t steps_done() const { return step_; }
  bool done() const { return step_ >= cfg_.steps; }
  PretrainMode mode() const { return mode_; }

  std::vector<std::size_t> batch_indices(std::size_t step) const {
    return epoch_batch(all_.size, cfg_.batch_size, cfg_.seed, step);
  }

  StepStats step() {
    if (done()) throw std::logic_error("pretraining already ran its " + std::to_string(cfg_.steps) + " steps");
    StepStats s;
    s.step = step_;
    s.lr = schedule_.lr_at(step_);
    const auto batch = select(all_, batch_indices(step_));
    const auto opt = cfg_.pretrain_options();
    if (mode_ == PretrainMode::kJoint) {
      auto losses = pretrain_step(batch, model_, rng_, opt);
      s.total = losses.total.item();
      s.mlm = PretrainLosses<float>::value(losses.mlm);
      s.mim = PretrainLosses<float>::value(losses.mim);
      s.itm = PretrainLosses<float>::value(losses.itm);
    } else {
      const auto plans = make_batch_plans(batch.size, batch.patches_per_image, {}, rng_, opt.masking);
      auto loss = mim_only_loss(model_, batch, plans, opt.normalize_pixel_targets);
      backward(loss);
      s.total = s.mim = loss.item();
    }
    opt_.step(params_, s.lr);
    auto all = model_.parameters();
    zero_grads(all);
    ++step_;
    return s;
  }

  Checkpoint checkpoint() {
    Checkpoint ck;
    ck.kind = kind_name(mode_);
    ck.step = step_;
    ck.rng_state = rng_state(rng_);
    ck.config = config_entries(cfg_);
    ck.vocab = vocab_.entries();
    ck.tensors = capture(model_.parameters());
    capture_optimizer(ck, opt_, params_);
    return ck;
  }

  // Continues an interrupted run of the same kind and architecture.
  void resume(const Checkpoint& ck) {
    if (ck.kind != kind_name(mode_)) {
      throw CheckpointError("cannot resume a " + std::string(kind_name(mode_)) + " run from a " + ck.kind + " checkpoint");
    }
    check_compatible(ck, cfg_);
    if (ck.vocab != vocab_.entries()) throw CheckpointError("checkpoint vocabulary differs from the run's");
    auto all = model_.parameters();
    restore(ck, all);
    restore_optimizer(ck, opt_, params_);
    set_rng_state(rng_, ck.rng_state);
    step_ = ck.step;
  }

  // Warm start: copies the visual embedder, encoder and MIM decoder from
  // another run. Text-side parameters keep their initialization.
  void init_from(const Checkpoint& ck) {
    check_compatible(ck, cfg_);
    ParamList<float> visual;
    model_.patch_embed.collect(visual, "patch_embed");
    model_.encoder.collect(visual, "encoder");
    model_.mim_decoder.collect(visual, "mim_decoder");
    restore(ck, visual);
  }

 private:
  ParamList<float> trainable() {
    ParamList<float> out;
    model_.patch_embed.collect(out, "patch_embed");
    if (mode_ == PretrainMode::kMimOnly) {
      model_.encoder.collect(out, "encoder");
      model_.mim_decoder.collect(out, "mim_decoder");
      return out;
    }
    model_.token_embed.collect(out, "token_embed");
    model_.encoder.collect(out, "encoder");
    if (cfg_.loss_mlm) model_.mlm_head.collect(out, "mlm_head");
    if (cfg_.loss_mim) model_.mim_decoder.collect(out, "mim_decoder");
    if (cfg_.loss_itm) model_.itm_head.collect(out, "itm_head");
    return out;
  }

  RunConfig cfg_;
  data::Vocab vocab_;
  PretrainMode mode_;
  VlcModel<float> model_;
  AdamW<float> opt_;
  Schedule schedule_;
  Rng rng_;
  MultimodalBatch all_;
  ParamList<float> params_;
  std::size_t step_ = 0;
};

// Rebuilds the model stored in a checkpoint.
inline VlcModel<float> model_from(const Checkpoint& ck, const RunConfig& cfg) {
  VlcModel<float> model(cfg.model(ck.vocab.size() + data::kReserved), cfg.seed);
  auto params = model.parameters();
  restore(ck, params);
  return model;
}

}  // namespace vlc
