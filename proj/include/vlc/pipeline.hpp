#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vlc/finetune.hpp"
#include "vlc/probe.hpp"
#include "vlc/trainer.hpp"

namespace vlc {

namespace fs = std::filesystem;

struct RunOptions {
  fs::path out = "run";
  std::optional<fs::path> resume;
  bool echo = true;
};

inline std::string checkpoint_name() { return "checkpoint.bin"; }

// Manifest lines that failed to load are logged and skipped.
inline void report_load_errors(const RunData& d, RunLog& log) {
  for (const auto& e : d.errors)
    log.line("skipped manifest line " + std::to_string(e.line) + (e.id.empty() ? "" : " (" + e.id + ")") + ": " + e.message);
}

// Pretraining metrics on the held-in and held-out sets.
inline Metrics pretrain_metrics(const VlcModel<float>& model, const data::Vocab& vocab, const RunData& d,
                                const RunConfig& cfg) {
  Metrics m;
  auto train = make_batch(std::span<const data::CaptionedImage>(d.train), vocab, cfg.text_len, cfg.patch);
  auto eval = make_batch(std::span<const data::CaptionedImage>(d.eval), vocab, cfg.text_len, cfg.patch);
  if (train.size >= 2) m.emplace_back("itm_acc_train", itm_accuracy(model, train));
  if (eval.size >= 2) {
    m.emplace_back("itm_acc_eval", itm_accuracy(model, eval));
    const auto scores = itm_score_matrix(model, eval);
    std::vector<std::size_t> truth(eval.size);
    std::iota(truth.begin(), truth.end(), 0);
    const auto tr = recall_at_k(scores.transposed(), truth, {1, 5, 10});
    const auto ir = recall_at_k(scores, truth, {1, 5, 10});
    for (std::size_t k : {1, 5, 10}) m.emplace_back("tr_r" + std::to_string(k), tr.at(k));
    for (std::size_t k : {1, 5, 10}) m.emplace_back("ir_r" + std::to_string(k), ir.at(k));
  }
  if (eval.size >= 1) {
    m.emplace_back("mlm_acc_eval", mlm_accuracy(model, eval));
    MaskingConfig mask;
    mask.image_ratio = cfg.image_mask_ratio > 0 ? cfg.image_mask_ratio : 0.6;
    Rng rng(cfg.eval_seed);
    const auto plans = make_batch_plans(eval.size, eval.patches_per_image, {}, rng, mask);
    const auto mim = mim_heldout(model, eval, plans);
    m.emplace_back("mim_mse_eval", mim.mse);
    m.emplace_back("mim_baseline_eval", mim.baseline);
  }
  return m;
}

inline Checkpoint run_pretrain(const RunConfig& cfg, const RunOptions& opt, PretrainMode mode = PretrainMode::kJoint) {
  fs::create_directories(opt.out);
  RunLog log(opt.out / "train.log", opt.echo);
  const auto d = load_run_data(cfg);
  report_load_errors(d, log);
  Pretrainer trainer(cfg, d.train, build_run_vocab(d, cfg), mode);
  log.line(std::string(kind_name(mode)) + ": " + std::to_string(d.train.size()) + " items, vocab " +
           std::to_string(trainer.vocab().size()) + ", " +
           std::to_string(count_parameters(trainer.model().parameters())) + " parameters");
  if (opt.resume) {
    trainer.resume(load_checkpoint(*opt.resume));
    log.line("resumed at step " + std::to_string(trainer.steps_done()));
  } else if (!cfg.init.empty()) {
    trainer.init_from(load_checkpoint(cfg.init));
    log.line("visual encoder initialized from " + cfg.init);
  }
  const auto start = std::chrono::steady_clock::now();
  StepStats last;
  while (!trainer.done()) {
    last = trainer.step();
    const std::size_t done = last.step + 1;
    if (cfg.log_every && (done % cfg.log_every == 0 || done == cfg.steps)) {
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.line(describe(last) + " elapsed " + format_value(sec) + "s");
    }
    if (cfg.checkpoint_every && done % cfg.checkpoint_every == 0 && done < cfg.steps)
      save_checkpoint(opt.out / checkpoint_name(), trainer.checkpoint());
  }
  auto ck = trainer.checkpoint();
  save_checkpoint(opt.out / checkpoint_name(), ck);

  Metrics m{{"steps", static_cast<double>(trainer.steps_done())},
            {"loss_total", last.total},
            {"loss_mlm", last.mlm},
            {"loss_mim", last.mim},
            {"loss_itm", last.itm}};
  if (mode == PretrainMode::kJoint) {
    for (auto& kv : pretrain_metrics(trainer.model(), trainer.vocab(), d, cfg)) m.push_back(kv);
  } else if (!d.eval.empty()) {
    auto eval = make_batch(std::span<const data::CaptionedImage>(d.eval), trainer.vocab(), cfg.text_len, cfg.patch);
    MaskingConfig mask;
    mask.image_ratio = cfg.image_mask_ratio;
    Rng rng(cfg.eval_seed);
    const auto plans = make_batch_plans(eval.size, eval.patches_per_image, {}, rng, mask);
    const auto mim = mim_heldout(trainer.model(), eval, plans, false);
    m.emplace_back("mim_mse_eval", mim.mse);
    m.emplace_back("mim_baseline_eval", mim.baseline);
  }
  write_metrics(opt.out / "metrics.tsv", m);
  for (const auto& [k, v] : m) log.line(k + " " + format_value(v));
  return ck;
}

enum class FinetuneTask { kVqa, kNlvr, kRetrieval };

inline FinetuneTask parse_task(const std::string& name) {
  if (name == "vqa") return FinetuneTask::kVqa;
  if (name == "nlvr") return FinetuneTask::kNlvr;
  if (name == "retrieval") return FinetuneTask::kRetrieval;
  throw std::invalid_argument("unknown fine-tuning task '" + name + "' (expected vqa, nlvr or retrieval)");
}

inline const char* task_name(FinetuneTask t) {
  switch (t) {
    case FinetuneTask::kVqa:
      return "vqa";
    case FinetuneTask::kNlvr:
      return "nlvr";
    case FinetuneTask::kRetrieval:
      return "retrieval";
  }
  return "";
}

// Encoder plus one task head, trained with layer-wise learning-rate decay.
class Finetuner {
 public:
  Finetuner(RunConfig cfg, FinetuneTask task, const RunData& d, data::Vocab vocab, const Checkpoint* init,
            const std::vector<std::string>* answers = nullptr)
      : cfg_(std::move(cfg)),
        task_(task),
        data_(d),
        vocab_(std::move(vocab)),
        model_(cfg_.model(vocab_.size()), cfg_.seed),
        opt_(cfg_.adamw()),
        schedule_(cfg_.finetune_schedule()) {
    validate(cfg_);
    if (init) {
      check_compatible(*init, cfg_);
      auto all = model_.parameters();
      restore(*init, all);
    }
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32), 0x66696e65u};
    rng_.seed(seq);
    Rng head_rng(cfg_.seed + 17);
    const std::size_t dm = cfg_.width;
    if (task_ != FinetuneTask::kRetrieval && !data_.synthetic()) {
      throw std::invalid_argument(std::string(task_name(task_)) + " fine-tuning needs the synthetic data source");
    }
    switch (task_) {
      case FinetuneTask::kVqa:
        if (answers && !answers->empty())
          answers_ = AnswerTable(*answers);
        else
          answers_ = cfg_.answers.empty() ? synthetic_answer_table() : AnswerTable::load(cfg_.answers);
        vqa_head_ = MlpHead<float>(dm, 2 * dm, answers_.size(), head_rng);
        samples_ = vqa_samples(data_.train_specs, answers_);
        break;
      case FinetuneTask::kNlvr: {
        nlvr_head_ = MlpHead<float>(2 * dm, 2 * dm, 2, head_rng);
        Rng pair_rng(cfg_.data_seed + 101);
        pairs_ = nlvr_pairs(data_.train, data_.train_specs, 2 * data_.train.size(), pair_rng);
        break;
      }
      case FinetuneTask::kRetrieval:
        retrieval_head_ = retrieval_head_from_itm(model_.itm_head);
        for (const auto& item : data_.train) captions_.push_back(item.caption);
        break;
    }
    params_ = finetune_backbone(model_);
    apply_layer_decay(params_, cfg_.layers, cfg_.layer_decay);
    head_params(params_);
  }

  VlcModel<float>& model() { return model_; }
  bool done() const { return step_ >= cfg_.steps; }
  std::size_t steps_done() const { return step_; }
  const AnswerTable& answers() const { return answers_; }

  double step() {
    if (done()) throw std::logic_error("fine-tuning already ran its steps");
    const double lr = schedule_.lr_at(step_);
    auto loss = task_loss();
    backward(loss);
    opt_.step(params_, lr);
    zero_grads(params_);
    auto all = model_.parameters();
    zero_grads(all);
    ++step_;
    return loss.item();
  }

  // Restores a fine-tuned head stored next to the backbone.
  void load_heads(const Checkpoint& ck) {
    ParamList<float> heads;
    head_params(heads);
    restore(ck, heads);
  }

  Metrics evaluate() {
    NoGradGuard ng;
    Metrics m;
    switch (task_) {
      case FinetuneTask::kVqa: {
        const auto samples = vqa_samples(data_.eval_specs, answers_);
        std::vector<std::size_t> pred, truth;
        for (std::size_t s = 0; s < samples.size(); s += 64) {
          std::vector<VqaSample> chunk(samples.begin() + static_cast<std::ptrdiff_t>(s),
                                       samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), s + 64)));
          auto scores = vqa_forward(model_, vqa_head_, vqa_batch(data_.eval, chunk), answers_);
          for (auto p : argmax_rows(scores.data(), answers_.size())) pred.push_back(p);
          for (const auto& c : chunk) truth.push_back(c.answer);
        }
        m.emplace_back("vqa_acc_eval", accuracy(pred, truth));
        break;
      }
      case FinetuneTask::kNlvr: {
        Rng pair_rng(cfg_.eval_seed + 101);
        const auto pairs = nlvr_pairs(data_.eval, data_.eval_specs, 2 * data_.eval.size(), pair_rng);
        std::vector<std::size_t> pred, truth;
        for (std::size_t s = 0; s < pairs.size(); s += 64) {
          std::span<const PairSample> chunk(pairs.data() + s, std::min<std::size_t>(64, pairs.size() - s));
          auto out = nlvr_forward(model_, nlvr_head_, chunk, vocab_);
          for (auto p : argmax_rows(out.logits.data(), 2)) pred.push_back(p);
          for (const auto& p : chunk) truth.push_back(p.label ? 1 : 0);
        }
        m.emplace_back("nlvr_acc_eval", accuracy(pred, truth));
        break;
      }
      case FinetuneTask::kRetrieval: {
        const auto scores = retrieval_matrix(model_, retrieval_head_, data_.eval, vocab_, cfg_);
        std::vector<std::size_t> truth(scores.rows);
        std::iota(truth.begin(), truth.end(), 0);
        const auto tr = recall_at_k(scores.transposed(), truth, {1, 5, 10});
        const auto ir = recall_at_k(scores, truth, {1, 5, 10});
        for (std::size_t k : {1, 5, 10}) m.emplace_back("tr_r" + std::to_string(k), tr.at(k));
        for (std::size_t k : {1, 5, 10}) m.emplace_back("ir_r" + std::to_string(k), ir.at(k));
        break;
      }
    }
    return m;
  }

  Checkpoint checkpoint() {
    Checkpoint ck;
    ck.kind = std::string("finetune-") + task_name(task_);
    ck.step = step_;
    ck.rng_state = rng_state(rng_);
    ck.config = config_entries(cfg_);
    ck.vocab = vocab_.entries();
    ck.answers = answers_.answers();
    auto all = model_.parameters();
    head_params(all);
    ck.tensors = capture(all);
    capture_optimizer(ck, opt_, params_);
    return ck;
  }

  // Rows are captions, columns images: [N, N] retrieval-head scores.
  static ScoreMatrix retrieval_matrix(const VlcModel<float>& model, const Linear<float>& head,
                                      const std::vector<data::CaptionedImage>& items, const data::Vocab& vocab,
                                      const RunConfig& cfg) {
    NoGradGuard ng;
    auto batch = make_batch(std::span<const data::CaptionedImage>(items), vocab, cfg.text_len, cfg.patch);
    const std::size_t n = batch.size;
    ScoreMatrix m{n, n, std::vector<double>(n * n)};
    for (std::size_t shift = 0; shift < n; ++shift) {
      std::vector<std::size_t> image_of(n);
      for (std::size_t i = 0; i < n; ++i) image_of[i] = (i + shift) % n;
      auto s = head(model.forward_full(batch, &image_of).h_cls);
      for (std::size_t i = 0; i < n; ++i) m.values[i * n + image_of[i]] = s.data()[i];
    }
    return m;
  }

 private:
  void head_params(ParamList<float>& out) {
    switch (task_) {
      case FinetuneTask::kVqa:
        vqa_head_.collect(out, "vqa_head");
        break;
      case FinetuneTask::kNlvr:
        nlvr_head_.collect(out, "nlvr_head");
        break;
      case FinetuneTask::kRetrieval:
        retrieval_head_.collect(out, "retrieval_head");
        break;
    }
  }

  MultimodalBatch vqa_batch(const std::vector<data::CaptionedImage>& items, const std::vector<VqaSample>& chunk) const {
    MultimodalBatch batch;
    for (const auto& s : chunk)
      append_sample(batch, items[s.item].image, data::encode(question_text(s.question), vocab_, cfg_.text_len), cfg_.patch);
    return batch;
  }

  BasicTensor<float> task_loss() {
    switch (task_) {
      case FinetuneTask::kVqa: {
        std::vector<VqaSample> chunk;
        for (auto i : epoch_batch(samples_.size(), cfg_.batch_size, cfg_.seed, step_)) chunk.push_back(samples_[i]);
        std::vector<float> targets(chunk.size() * answers_.size(), 0.0f);
        for (std::size_t b = 0; b < chunk.size(); ++b) targets[b * answers_.size() + chunk[b].answer] = 1.0f;
        return vqa_loss(vqa_forward(model_, vqa_head_, vqa_batch(data_.train, chunk), answers_), targets);
      }
      case FinetuneTask::kNlvr: {
        std::vector<PairSample> chunk;
        std::vector<std::size_t> labels;
        for (auto i : epoch_batch(pairs_.size(), cfg_.batch_size, cfg_.seed, step_)) {
          chunk.push_back(pairs_[i]);
          labels.push_back(pairs_[i].label ? 1 : 0);
        }
        return cross_entropy(nlvr_forward(model_, nlvr_head_, std::span<const PairSample>(chunk), vocab_).logits, labels);
      }
      case FinetuneTask::kRetrieval: {
        std::vector<RetrievalQuery> queries;
        for (auto i : epoch_batch(data_.train.size(), cfg_.batch_size, cfg_.seed, step_)) {
          const auto& item = data_.train[i];
          queries.push_back({&item.image, item.caption,
                             sample_negatives(captions_, item.caption, cfg_.retrieval_negatives, rng_)});
        }
        return retrieval_batch_loss(model_, retrieval_head_, queries, vocab_);
      }
    }
    throw std::logic_error("unknown task");
  }

  RunConfig cfg_;
  FinetuneTask task_;
  const RunData& data_;
  data::Vocab vocab_;
  VlcModel<float> model_;
  AdamW<float> opt_;
  Schedule schedule_;
  Rng rng_;
  ParamList<float> params_;
  std::size_t step_ = 0;
  AnswerTable answers_;
  MlpHead<float> vqa_head_;
  MlpHead<float> nlvr_head_;
  Linear<float> retrieval_head_;
  std::vector<VqaSample> samples_;
  std::vector<PairSample> pairs_;
  std::vector<std::string> captions_;
};

inline Checkpoint run_finetune(FinetuneTask task, const RunConfig& cfg, const RunOptions& opt) {
  fs::create_directories(opt.out);
  RunLog log(opt.out / "train.log", opt.echo);
  const auto d = load_run_data(cfg);
  report_load_errors(d, log);
  std::optional<Checkpoint> init;
  data::Vocab vocab = build_run_vocab(d, cfg);
  if (!cfg.init.empty()) {
    init = load_checkpoint(cfg.init);
    vocab = data::Vocab::from_words(init->vocab);
    log.line("initialized from " + cfg.init + " (" + init->kind + ", step " + std::to_string(init->step) + ")");
  }
  Finetuner ft(cfg, task, d, vocab, init ? &*init : nullptr);
  const auto start = std::chrono::steady_clock::now();
  double loss = 0;
  while (!ft.done()) {
    loss = ft.step();
    const std::size_t done = ft.steps_done();
    if (cfg.log_every && (done % cfg.log_every == 0 || done == cfg.steps)) {
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.line(std::string(task_name(task)) + " step " + std::to_string(done - 1) + " loss " + format_value(loss) +
               " elapsed " + format_value(sec) + "s");
    }
  }
  auto ck = ft.checkpoint();
  save_checkpoint(opt.out / checkpoint_name(), ck);
  if (task == FinetuneTask::kVqa) ft.answers().save((opt.out / "answers.txt").string());
  Metrics m{{"steps", static_cast<double>(ft.steps_done())}, {"loss", loss}};
  for (auto& kv : ft.evaluate()) m.push_back(kv);
  write_metrics(opt.out / "metrics.tsv", m);
  for (const auto& [k, v] : m) log.line(k + " " + format_value(v));
  return ck;
}

// Evaluates a checkpoint. Pretraining checkpoints report matching, retrieval,
// masked-token and reconstruction metrics; fine-tuned ones their task metric.
inline Metrics run_eval(const Checkpoint& ck, const RunConfig& cfg, const fs::path& out) {
  const auto d = load_run_data(cfg);
  const auto vocab = data::Vocab::from_words(ck.vocab);
  check_compatible(ck, cfg);
  Metrics m;
  if (ck.kind == "pretrain" || ck.kind == "pretrain-mim") {
    m = pretrain_metrics(model_from(ck, cfg), vocab, d, cfg);
  } else if (ck.kind.rfind("finetune-", 0) == 0) {
    RunConfig c = cfg;
    c.answers.clear();
    Finetuner ft(c, parse_task(ck.kind.substr(9)), d, vocab, &ck, &ck.answers);
    ft.load_heads(ck);
    m = ft.evaluate();
  } else {
    throw CheckpointError("unknown checkpoint kind " + ck.kind);
  }
  fs::create_directories(out);
  write_metrics(out / "metrics.tsv", m);
  return m;
}

enum class ProbeKind { kHeatmap, kCluster, kNounSim };

inline ProbeKind parse_probe(const std::string& name) {
  if (name == "heatmap") return ProbeKind::kHeatmap;
  if (name == "cluster") return ProbeKind::kCluster;
  if (name == "nounsim") return ProbeKind::kNounSim;
  throw std::invalid_argument("unknown probe '" + name + "' (expected heatmap, cluster or nounsim)");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  return out;
}

// Fraction of held-out synthetic images whose argmax patch for the color and
// shape words lies in the captioned quadrant.
inline Metrics alignment_metrics(const VlcModel<float>& model, const data::Vocab& vocab,
                                 const std::vector<data::CaptionedImage>& items,
                                 const std::vector<data::SyntheticSpec>& specs) {
  std::size_t color_hit = 0, shape_hit = 0;
  const std::size_t g = model.cfg.grid();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto q = static_cast<std::size_t>(specs[i].quadrant);
    auto enc = probe_forward(model, vocab, items[i].image, items[i].caption);
    color_hit += patch_quadrant(alignment_at(model, enc, 2).argmax(), g, g) == q;
    shape_hit += patch_quadrant(alignment_at(model, enc, 3).argmax(), g, g) == q;
  }
  const double n = static_cast<double>(items.size());
  return {{"align_color_quadrant", static_cast<double>(color_hit) / n},
          {"align_shape_quadrant", static_cast<double>(shape_hit) / n}};
}

// Writes probe artifacts under `out`: heatmap.{png,tsv}, clusters.{ppm,tsv},
// or nounsim.tsv plus nounsim_hist.tsv, and a metrics.tsv summary.
inline Metrics run_probe(ProbeKind kind, const Checkpoint& ck, const RunConfig& cfg, const fs::path& out) {
  check_compatible(ck, cfg);
  fs::create_directories(out);
  const auto d = load_run_data(cfg);
  const auto vocab = data::Vocab::from_words(ck.vocab);
  const auto model = model_from(ck, cfg);
  if (d.eval.empty()) throw std::invalid_argument("probing needs at least one held-out item");
  if (cfg.probe_image >= d.eval.size()) {
    throw ConfigError("probe.image", "index " + std::to_string(cfg.probe_image) + " beyond " +
                                         std::to_string(d.eval.size()) + " held-out items");
  }
  const auto& item = d.eval[cfg.probe_image];
  Metrics m;
  switch (kind) {
    case ProbeKind::kHeatmap: {
      std::string word = cfg.probe_word;
      if (word.empty()) {
        const auto words = data::split_words(item.caption);
        word = words.size() > 2 ? words[2] : words.back();
      }
      const auto map = word_patch_alignment(model, vocab, item.image, item.caption, word);
      write_heatmap(map, out / "heatmap.png");
      m.emplace_back("argmax_patch", static_cast<double>(map.argmax()));
      if (d.synthetic())
        for (auto& kv : alignment_metrics(model, vocab, d.eval, d.eval_specs)) m.push_back(kv);
      break;
    }
    case ProbeKind::kCluster: {
      Rng rng(cfg.seed);
      const auto res = cluster_patches(model, {item.image}, cfg.probe_k, rng);
      const std::size_t g = model.cfg.grid();
      write_cluster_map(res.assignment, g, g, out / "clusters.ppm");
      std::string text = "row\tcol\tcluster\n";
      for (std::size_t j = 0; j < res.assignment.size(); ++j)
        text += std::to_string(j / g) + "\t" + std::to_string(j % g) + "\t" + std::to_string(res.assignment[j]) + "\n";
      write_file_atomic(out / "clusters.tsv", text);
      m.emplace_back("iterations", static_cast<double>(res.iterations));
      m.emplace_back("inertia", res.inertia());
      break;
    }
    case ProbeKind::kNounSim: {
      auto nouns = split_list(cfg.probe_nouns);
      if (nouns.empty())
        for (const char* w : data::kShapeWords) nouns.emplace_back(w);
      const auto sims = noun_similarity(model, vocab, d.eval, nouns);
      std::string text = "noun\timage\tmax_cosine\tunknown\n";
      for (const auto& s : sims)
        text += s.noun + "\t" + s.image_id + "\t" + format_value(s.max_similarity) + "\t" + (s.unknown ? "1" : "0") + "\n";
      write_file_atomic(out / "nounsim.tsv", text);
      std::string hist = "noun\tbin_lo\tbin_hi\tcount\n";
      for (const auto& noun : nouns) {
        std::vector<double> values;
        bool unknown = false;
        for (const auto& s : sims)
          if (s.noun == noun) {
            values.push_back(s.max_similarity);
            unknown = s.unknown;
          }
        const auto h = histogram(values, cfg.probe_bins);
        for (std::size_t b = 0; b < h.counts.size(); ++b)
          hist += noun + "\t" + format_value(h.lo + static_cast<double>(b) * h.bin_width()) + "\t" +
                  format_value(h.lo + static_cast<double>(b + 1) * h.bin_width()) + "\t" + std::to_string(h.counts[b]) + "\n";
        double mean = 0;
        for (double v : values) mean += v;
        if (!values.empty()) mean /= static_cast<double>(values.size());
        m.emplace_back("mean_max_cosine_" + noun, mean);
        if (unknown) m.emplace_back("unknown_" + noun, 1.0);
      }
      write_file_atomic(out / "nounsim_hist.tsv", hist);
      break;
    }
  }
  write_metrics(out / "metrics.tsv", m);
  return m;
}

// Renders the synthetic training set as image files plus a JSONL manifest.
inline fs::path run_gen_data(const RunConfig& cfg, const fs::path& out, const std::string& ext = ".png") {
  const auto samples = data::generate_synthetic(cfg.synthetic_count, cfg.data_seed, synthetic_config(cfg));
  return data::export_jsonl(data::items_of(samples), out, ext);
}

}  // namespace vlc
