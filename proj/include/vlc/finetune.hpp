#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "vlc/data/synthetic.hpp"
#include "vlc/model.hpp"

namespace vlc {

// Two affine layers with a GELU between them.
template <typename T>
struct MlpHead {
  Linear<T> fc1;
  Linear<T> fc2;

  MlpHead() = default;
  MlpHead(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) : fc1(in, hidden, rng), fc2(hidden, out, rng) {}

  std::size_t out_features() const { return fc2.out_features(); }
  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return fc2(gelu(fc1(x))); }

  void collect(ParamList<T>& out, const std::string& prefix) {
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
  }
};

// Closed answer set; line number in the answer file is the class id.
class AnswerTable {
 public:
  AnswerTable() = default;
  explicit AnswerTable(std::vector<std::string> answers) : answers_(std::move(answers)) {}

  static AnswerTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read answer table " + path);
    std::vector<std::string> answers;
    for (std::string line; std::getline(in, line);) answers.push_back(line);
    return AnswerTable(std::move(answers));
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write answer table " + path);
    for (const auto& a : answers_) out << a << '\n';
  }

  std::size_t size() const { return answers_.size(); }
  const std::string& answer(std::size_t id) const { return answers_.at(id); }
  std::size_t id(const std::string& answer) const {
    auto it = std::find(answers_.begin(), answers_.end(), answer);
    if (it == answers_.end()) throw std::out_of_range("answer not in table: " + answer);
    return static_cast<std::size_t>(it - answers_.begin());
  }
  const std::vector<std::string>& answers() const { return answers_; }

 private:
  std::vector<std::string> answers_;
};

// Synthetic VQA: colors, shapes and quadrants form the answer set.
inline AnswerTable synthetic_answer_table() {
  std::vector<std::string> answers;
  for (const char* w : data::kColorWords) answers.emplace_back(w);
  for (const char* w : data::kShapeWords) answers.emplace_back(w);
  for (const char* w : data::kQuadrantWords) answers.emplace_back(w);
  return AnswerTable(std::move(answers));
}

enum class VqaQuestion { kColor, kShape, kWhere };

inline const char* question_text(VqaQuestion q) {
  switch (q) {
    case VqaQuestion::kColor:
      return "what color is the shape";
    case VqaQuestion::kShape:
      return "what shape is it";
    case VqaQuestion::kWhere:
      return "where is the shape";
  }
  return "";
}

inline std::string answer_for(VqaQuestion q, const data::SyntheticSpec& s) {
  switch (q) {
    case VqaQuestion::kColor:
      return data::word(s.color);
    case VqaQuestion::kShape:
      return data::word(s.shape);
    case VqaQuestion::kWhere:
      return data::word(s.quadrant);
  }
  return "";
}

inline std::string nlvr_statement(data::Color c) { return std::string("both images contain a ") + data::word(c) + " shape"; }

inline std::vector<std::string> task_prompts() {
  std::vector<std::string> out;
  for (auto q : {VqaQuestion::kColor, VqaQuestion::kShape, VqaQuestion::kWhere}) out.emplace_back(question_text(q));
  for (std::size_t c = 0; c < data::kColorWords.size(); ++c) out.push_back(nlvr_statement(static_cast<data::Color>(c)));
  return out;
}

// Multilabel answer scores [B, K] from h_CLS of a full forward. The question
// takes the caption slot of the batch.
template <typename T>
BasicTensor<T> vqa_forward(const VlcModel<T>& model, const MlpHead<T>& head, const MultimodalBatch& batch,
                           const AnswerTable& answers) {
  if (head.out_features() != answers.size()) {
    throw std::invalid_argument("vqa head has " + std::to_string(head.out_features()) + " outputs but the answer table has " +
                                std::to_string(answers.size()) + " entries");
  }
  return head(model.forward_full(batch).h_cls);
}

// Per-class binary NLL with soft targets in [0, 1]: targets[b * K + k].
template <typename T>
BasicTensor<T> vqa_loss(const BasicTensor<T>& scores, const std::vector<T>& targets) {
  return bce_with_logits(scores, targets);
}

struct PairSample {
  data::Image image_a;
  data::Image image_b;
  std::string caption;
  bool label = false;
};

// Pair method: the caption runs once with each image; the two h_CLS vectors
// are concatenated and classified. Returns logits [B, 2].
template <typename T>
struct NlvrForward {
  BasicTensor<T> logits;
  BasicTensor<T> pooled;  // [B, 2d]
  std::size_t forwards = 0;
};

template <typename T>
NlvrForward<T> nlvr_forward(const VlcModel<T>& model, const MlpHead<T>& head, std::span<const PairSample> pairs,
                            const data::Vocab& vocab) {
  MultimodalBatch with_a, with_b;
  for (const auto& p : pairs) {
    auto text = data::encode(p.caption, vocab, model.cfg.encoder.m_max);
    append_sample(with_a, p.image_a, text, model.cfg.patch);
    append_sample(with_b, p.image_b, text, model.cfg.patch);
  }
  NlvrForward<T> out;
  auto cls_a = model.forward_full(with_a).h_cls;
  auto cls_b = model.forward_full(with_b).h_cls;
  out.forwards = 2 * pairs.size();
  out.pooled = concat<T>({cls_a, cls_b}, 1);
  out.logits = head(out.pooled);
  return out;
}

// Retrieval similarity head d -> 1, copied from the ITM head's positive class.
template <typename T>
Linear<T> retrieval_head_from_itm(const Linear<T>& itm) {
  const std::size_t d = itm.in_features();
  Linear<T> head;
  head.weight = make_param<T>({d, 1});
  head.bias = make_param<T>({1});
  auto w = head.weight.mutable_data();
  for (std::size_t i = 0; i < d; ++i) w[i] = itm.weight.data()[i * 2 + 1];
  head.bias.mutable_data()[0] = itm.bias.data()[1];
  return head;
}

// One score per (image, caption) row of the batch: [B].
template <typename T>
BasicTensor<T> retrieval_scores(const VlcModel<T>& model, const Linear<T>& head, const MultimodalBatch& batch) {
  auto s = head(model.forward_full(batch).h_cls);
  return reshape(s, {batch.size});
}

// One retrieval query: an anchor image, its caption and sampled negatives.
struct RetrievalQuery {
  const data::Image* anchor = nullptr;
  std::string positive;
  std::vector<std::string> negatives;
};

// Softmax cross-entropy over [positive, negatives...] scores per anchor with
// the positive as target, averaged over the anchors. All anchors must carry
// the same number of negatives.
template <typename T>
BasicTensor<T> retrieval_batch_loss(const VlcModel<T>& model, const Linear<T>& head,
                                    const std::vector<RetrievalQuery>& queries, const data::Vocab& vocab) {
  if (queries.empty()) throw std::invalid_argument("retrieval fine-tuning needs at least one anchor");
  const std::size_t k = queries.front().negatives.size();
  if (k == 0) throw std::invalid_argument("retrieval fine-tuning needs at least one negative caption");
  MultimodalBatch batch;
  for (const auto& q : queries) {
    if (q.negatives.size() != k) throw std::invalid_argument("retrieval anchors carry different negative counts");
    append_sample(batch, *q.anchor, data::encode(q.positive, vocab, model.cfg.encoder.m_max), model.cfg.patch);
    for (const auto& neg : q.negatives) {
      if (neg == q.positive) throw std::invalid_argument("negative caption equals the positive caption");
      append_sample(batch, *q.anchor, data::encode(neg, vocab, model.cfg.encoder.m_max), model.cfg.patch);
    }
  }
  auto scores = reshape(retrieval_scores(model, head, batch), {queries.size(), k + 1});
  return cross_entropy(scores, std::vector<std::size_t>(queries.size(), 0));
}

template <typename T>
BasicTensor<T> retrieval_finetune_loss(const VlcModel<T>& model, const Linear<T>& head, const data::Image& anchor,
                                       const std::string& positive, const std::vector<std::string>& negatives,
                                       const data::Vocab& vocab) {
  return retrieval_batch_loss(model, head, {RetrievalQuery{&anchor, positive, negatives}}, vocab);
}

// Up to `count` captions drawn from `pool` that differ from the positive.
inline std::vector<std::string> sample_negatives(const std::vector<std::string>& pool, const std::string& positive,
                                                 std::size_t count, Rng& rng) {
  std::vector<std::string> distinct;
  for (const auto& c : pool)
    if (c != positive && std::find(distinct.begin(), distinct.end(), c) == distinct.end()) distinct.push_back(c);
  if (distinct.empty()) throw std::invalid_argument("no caption differs from the positive");
  std::vector<std::string> out;
  std::uniform_int_distribution<std::size_t> pick(0, distinct.size() - 1);
  if (distinct.size() >= count) {
    std::shuffle(distinct.begin(), distinct.end(), rng);
    out.assign(distinct.begin(), distinct.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(distinct[pick(rng)]);
  }
  return out;
}

struct VqaSample {
  std::size_t item = 0;
  VqaQuestion question = VqaQuestion::kColor;
  std::size_t answer = 0;
};

// Every item asked every question.
inline std::vector<VqaSample> vqa_samples(const std::vector<data::SyntheticSpec>& specs, const AnswerTable& answers) {
  std::vector<VqaSample> out;
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (auto q : {VqaQuestion::kColor, VqaQuestion::kShape, VqaQuestion::kWhere})
      out.push_back({i, q, answers.id(answer_for(q, specs[i]))});
  return out;
}

// Balanced pairs for "both images contain a <color> shape".
inline std::vector<PairSample> nlvr_pairs(const std::vector<data::CaptionedImage>& items,
                                          const std::vector<data::SyntheticSpec>& specs, std::size_t count, Rng& rng) {
  if (items.size() < 2) throw std::invalid_argument("pair task needs at least two items");
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  std::uniform_int_distribution<int> color(0, 3);
  std::vector<PairSample> out;
  while (out.size() < count) {
    const bool want = out.size() % 2 == 0;
    const auto c = static_cast<data::Color>(color(rng));
    const std::size_t a = pick(rng), b = pick(rng);
    const bool label = specs[a].color == c && specs[b].color == c;
    if (label != want) continue;
    out.push_back({items[a].image, items[b].image, nlvr_statement(c), label});
  }
  return out;
}

// Layer-wise learning-rate decay: heads and the final norm keep the base rate,
// block k of L gets decay^(L - k), the embedders decay^(L + 1).
template <typename T>
void apply_layer_decay(ParamList<T>& params, std::size_t layers, double decay) {
  const std::string block_prefix = "encoder.blocks.";
  for (auto& p : params) {
    if (p.name.rfind("patch_embed", 0) == 0 || p.name.rfind("token_embed", 0) == 0) {
      p.lr_scale = std::pow(decay, static_cast<double>(layers + 1));
    } else if (p.name.rfind(block_prefix, 0) == 0) {
      const std::size_t k = std::stoul(p.name.substr(block_prefix.size()));
      p.lr_scale = std::pow(decay, static_cast<double>(layers - k));
    } else {
      p.lr_scale = 1.0;
    }
  }
}

// Embedders and encoder: the parameters every fine-tuning task updates.
template <typename T>
ParamList<T> finetune_backbone(VlcModel<T>& model) {
  ParamList<T> out;
  model.patch_embed.collect(out, "patch_embed");
  model.token_embed.collect(out, "token_embed");
  model.encoder.collect(out, "encoder");
  return out;
}

}  // namespace vlc
