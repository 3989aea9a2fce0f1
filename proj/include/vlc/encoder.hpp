#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vlc/data/vocab.hpp"
#include "vlc/nn.hpp"

namespace vlc {

struct EncoderConfig {
  std::size_t layers = 4;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 4;
  std::size_t n_max = 16;
  std::size_t m_max = 16;

  void validate() const {
    if (width == 0 || heads == 0 || width % heads != 0) {
      throw std::invalid_argument("encoder width " + std::to_string(width) + " is not divisible by " +
                                  std::to_string(heads) + " heads");
    }
  }
};

// Closed-form parameter count of the visual path plus encoder: patch
// projection, patch position/type/norm, L blocks, final norm (when L > 0).
// The text embedder is excluded, as is customary when quoting ViT sizes.
inline std::size_t encoder_parameter_count(const EncoderConfig& cfg, std::size_t patch_dim) {
  const std::size_t d = cfg.width, r = cfg.mlp_ratio;
  const std::size_t per_block = (4 + 2 * r) * d * d + (9 + r) * d;
  const std::size_t embed = patch_dim * d + d + cfg.n_max * d + d + 2 * d;
  return embed + cfg.layers * per_block + (cfg.layers ? 2 * d : 0);
}

struct MaskingConfig {
  double image_ratio = 0.6;
  double text_prob = 0.15;
  bool bert_mix = false;  // 80/10/10 MASK/random/keep corruption
};

// Which patches the encoder sees and which tokens are MLM targets.
struct MaskPlan {
  std::vector<std::size_t> text_masked;   // token positions, never CLS or PAD
  std::vector<std::size_t> image_kept;    // ascending
  std::vector<std::size_t> image_masked;  // ascending

  std::size_t patch_count() const { return image_kept.size() + image_masked.size(); }

  static MaskPlan full(std::size_t n) {
    MaskPlan p;
    p.image_kept.resize(n);
    std::iota(p.image_kept.begin(), p.image_kept.end(), 0);
    return p;
  }
};

inline std::size_t masked_patch_count(std::size_t n, double ratio) {
  return std::min(n, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));
}

// Fixed-count image masking via a seeded shuffle; i.i.d. Bernoulli text
// masking over non-special, non-PAD positions.
inline MaskPlan make_mask_plan(std::size_t n, std::span<const std::uint8_t> text_valid, Rng& rng,
                               const MaskingConfig& cfg = {}) {
  if (n == 0) throw std::invalid_argument("make_mask_plan: no patches");
  MaskPlan plan;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_masked = masked_patch_count(n, cfg.image_ratio);
  plan.image_masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_masked));
  plan.image_kept.assign(order.begin() + static_cast<std::ptrdiff_t>(n_masked), order.end());
  std::sort(plan.image_masked.begin(), plan.image_masked.end());
  std::sort(plan.image_kept.begin(), plan.image_kept.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t pos = 1; pos < text_valid.size(); ++pos) {
    if (text_valid[pos] && unit(rng) < cfg.text_prob) plan.text_masked.push_back(pos);
  }
  return plan;
}

// One plan per sample. When text masking is on and the whole batch drew no
// text target, the text draws are repeated so the MLM loss is defined.
inline std::vector<MaskPlan> make_batch_plans(std::size_t batch, std::size_t n, std::span<const std::uint8_t> text_valid,
                                              Rng& rng, const MaskingConfig& cfg = {}) {
  const std::size_t m = batch ? text_valid.size() / batch : 0;
  std::vector<MaskPlan> plans;
  for (std::size_t b = 0; b < batch; ++b) plans.push_back(make_mask_plan(n, text_valid.subspan(b * m, m), rng, cfg));
  bool eligible = false;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t pos = 1; pos < m; ++pos) eligible = eligible || text_valid[b * m + pos];
  if (cfg.text_prob <= 0.0 || !eligible) return plans;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto total = [&] {
    std::size_t t = 0;
    for (const auto& p : plans) t += p.text_masked.size();
    return t;
  };
  while (total() == 0) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t pos = 1; pos < m; ++pos)
        if (text_valid[b * m + pos] && unit(rng) < cfg.text_prob) plans[b].text_masked.push_back(pos);
  }
  return plans;
}

// Replaces masked token ids (flattened [B, m]) by MASK, or by the BERT mix.
inline std::vector<data::TokenId> corrupt_tokens(const std::vector<data::TokenId>& ids, const std::vector<MaskPlan>& plans,
                                                 std::size_t vocab_size, Rng& rng, const MaskingConfig& cfg = {}) {
  std::vector<data::TokenId> out = ids;
  const std::size_t m = plans.empty() ? 0 : ids.size() / plans.size();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<data::TokenId> random_word(static_cast<data::TokenId>(data::kReserved),
                                                            static_cast<data::TokenId>(std::max(vocab_size, data::kReserved + 1) - 1));
  for (std::size_t b = 0; b < plans.size(); ++b)
    for (std::size_t pos : plans[b].text_masked) {
      data::TokenId& t = out[b * m + pos];
      if (!cfg.bert_mix) {
        t = data::kMask;
        continue;
      }
      const double u = unit(rng);
      if (u < 0.8)
        t = data::kMask;
      else if (u < 0.9 && vocab_size > data::kReserved)
        t = random_word(rng);
    }
  return out;
}

// Pre-LN transformer block: x + MSA(LN(x)), then x + MLP(LN(x)).
template <typename T>
struct TransformerBlock {
  LayerNorm<T> ln1;
  Linear<T> q, k, v, o;
  LayerNorm<T> ln2;
  Linear<T> fc1, fc2;
  std::size_t heads = 1;

  TransformerBlock() = default;
  TransformerBlock(std::size_t width, std::size_t n_heads, std::size_t mlp_ratio, Rng& rng, T eps = T(1e-6))
      : ln1(width, eps),
        q(width, width, rng),
        k(width, width, rng),
        v(width, width, rng),
        o(width, width, rng),
        ln2(width, eps),
        fc1(width, width * mlp_ratio, rng),
        fc2(width * mlp_ratio, width, rng),
        heads(n_heads) {}

  // x: [B, S, d]; key_valid: B*S flags or empty for all-valid. Attention
  // probabilities [B, H, S, S] are appended to `trace` when given.
  BasicTensor<T> attention(const BasicTensor<T>& x, const std::vector<std::uint8_t>& key_valid,
                           std::vector<BasicTensor<T>>* trace) const {
    const std::size_t b = x.dim(0), s = x.dim(1), d = x.dim(2), dh = d / heads;
    auto split = [&](const BasicTensor<T>& t) { return permute(reshape(t, {b, s, heads, dh}), {0, 2, 1, 3}); };
    auto qh = split(q(x));
    auto kh = split(k(x));
    auto vh = split(v(x));
    auto scores = scale(matmul(qh, transpose_last(kh)), T(1) / std::sqrt(T(dh)));
    if (!key_valid.empty()) scores = mask_keys(scores, key_valid);
    auto probs = softmax(scores);
    if (trace) trace->push_back(probs);
    auto ctx = reshape(permute(matmul(probs, vh), {0, 2, 1, 3}), {b, s, d});
    return o(ctx);
  }

  BasicTensor<T> operator()(const BasicTensor<T>& x, const std::vector<std::uint8_t>& key_valid,
                            std::vector<BasicTensor<T>>* trace = nullptr) const {
    auto h = add(x, attention(ln1(x), key_valid, trace));
    return add(h, fc2(gelu(fc1(ln2(h)))));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    ln1.collect(out, prefix + ".ln1");
    q.collect(out, prefix + ".attn.q");
    k.collect(out, prefix + ".attn.k");
    v.collect(out, prefix + ".attn.v");
    o.collect(out, prefix + ".attn.o");
    ln2.collect(out, prefix + ".ln2");
    fc1.collect(out, prefix + ".mlp.fc1");
    fc2.collect(out, prefix + ".mlp.fc2");
  }
};

// Contextual states for the merged sequence {CLS, w_1..w_{m-1}, v_kept...}.
template <typename T>
struct EncoderOutput {
  BasicTensor<T> states;      // [B, S, d]
  BasicTensor<T> h_cls;       // [B, d] (absent when there is no text)
  BasicTensor<T> h_text;      // [B, m, d], position 0 is CLS
  BasicTensor<T> h_image;     // [B, n_kept, d]
  std::size_t text_len = 0;   // m, including CLS
  std::vector<std::vector<std::size_t>> kept;  // patch index of each h_image row
  std::vector<BasicTensor<T>> attention;        // filled when tracing

  std::size_t sequence_length() const { return states.dim(1); }
};

template <typename T>
struct Encoder {
  EncoderConfig cfg;
  std::vector<TransformerBlock<T>> blocks;
  LayerNorm<T> final_norm;

  Encoder() = default;
  Encoder(const EncoderConfig& c, Rng& rng, T eps = T(1e-6)) : cfg(c), final_norm(c.width, eps) {
    cfg.validate();
    for (std::size_t l = 0; l < cfg.layers; ++l) blocks.emplace_back(cfg.width, cfg.heads, cfg.mlp_ratio, rng, eps);
  }

  // Runs the blocks over an already assembled sequence. A zero-block stack is
  // the identity, so the final norm only follows real blocks.
  BasicTensor<T> run(BasicTensor<T> x, const std::vector<std::uint8_t>& key_valid,
                     std::vector<BasicTensor<T>>* trace = nullptr) const {
    for (const auto& blk : blocks) x = blk(x, key_valid, trace);
    return blocks.empty() ? x : final_norm(x);
  }

  // text: [B, m, d] embedded tokens (MASK already substituted), or nullopt for
  // an image-only pass. patches: [B, n, d] embedded patches. Masked patches are
  // dropped before the first block.
  EncoderOutput<T> encode(const std::optional<BasicTensor<T>>& text, const std::vector<std::uint8_t>& text_valid,
                          const BasicTensor<T>& patches, const std::vector<MaskPlan>& plans, bool trace = false) const {
    if (patches.rank() != 3 || patches.dim(2) != cfg.width) {
      throw ShapeError("encode: patch embeddings " + to_string(patches.shape()) + " do not match width " +
                       std::to_string(cfg.width));
    }
    const std::size_t b = patches.dim(0), n = patches.dim(1), d = cfg.width;
    if (plans.size() != b) throw ShapeError("encode: " + std::to_string(plans.size()) + " mask plans for batch " + std::to_string(b));
    const std::size_t n_kept = plans.front().image_kept.size();
    std::vector<std::size_t> rows;
    rows.reserve(b * n_kept);
    for (std::size_t i = 0; i < b; ++i) {
      if (plans[i].image_kept.size() != n_kept) throw ShapeError("encode: mask plans keep different patch counts");
      for (std::size_t p : plans[i].image_kept) {
        if (p >= n) throw ShapeError("encode: mask plan references patch " + std::to_string(p) + " of " + std::to_string(n));
        rows.push_back(i * n + p);
      }
      for (std::size_t p : plans[i].image_masked)
        if (p >= n) throw ShapeError("encode: mask plan references patch " + std::to_string(p) + " of " + std::to_string(n));
    }
    auto kept = gather_rows(patches, std::move(rows), {b, n_kept, d});

    std::size_t m = 0;
    BasicTensor<T> seq = kept;
    std::vector<std::uint8_t> key_valid;
    if (text) {
      if (text->rank() != 3 || text->dim(0) != b || text->dim(2) != d) {
        throw ShapeError("encode: token embeddings " + to_string(text->shape()) + " do not match patches " +
                         to_string(patches.shape()));
      }
      m = text->dim(1);
      if (text_valid.size() != b * m) throw ShapeError("encode: padding mask size mismatch");
      for (const auto& plan : plans)
        for (std::size_t pos : plan.text_masked)
          if (pos == 0 || pos >= m) throw ShapeError("encode: text mask position " + std::to_string(pos) + " out of range");
      seq = concat<T>({*text, kept}, 1);
      key_valid.assign(b * (m + n_kept), 1);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t t = 0; t < m; ++t) key_valid[i * (m + n_kept) + t] = text_valid[i * m + t];
    }

    EncoderOutput<T> out;
    out.text_len = m;
    out.states = run(seq, key_valid, trace ? &out.attention : nullptr);
    const std::size_t s = m + n_kept;
    std::vector<std::size_t> text_rows, cls_rows, image_rows;
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t t = 0; t < m; ++t) text_rows.push_back(i * s + t);
      if (m) cls_rows.push_back(i * s);
      for (std::size_t j = 0; j < n_kept; ++j) image_rows.push_back(i * s + m + j);
      out.kept.push_back(plans[i].image_kept);
    }
    if (m) {
      out.h_text = gather_rows(out.states, std::move(text_rows), {b, m, d});
      out.h_cls = gather_rows(out.states, std::move(cls_rows), {b, d});
    }
    out.h_image = gather_rows(out.states, std::move(image_rows), {b, n_kept, d});
    return out;
  }

  EncoderOutput<T> encode_full(const std::optional<BasicTensor<T>>& text, const std::vector<std::uint8_t>& text_valid,
                               const BasicTensor<T>& patches, bool trace = false) const {
    std::vector<MaskPlan> plans(patches.dim(0), MaskPlan::full(patches.dim(1)));
    return encode(text, text_valid, patches, plans, trace);
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].collect(out, prefix + ".blocks." + std::to_string(l));
    if (!blocks.empty()) final_norm.collect(out, prefix + ".norm");
  }
};

}  // namespace vlc
