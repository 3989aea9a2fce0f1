#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vlc/batch.hpp"
#include "vlc/encoder.hpp"

namespace vlc {

// Lightweight transformer that sees kept-patch states plus a learned mask
// embedding at every dropped position, and regresses raw pixels.
template <typename T>
struct MimDecoder {
  Linear<T> adapter;        // d -> d_dec
  BasicTensor<T> mask_token;  // [d_dec]
  BasicTensor<T> pos;         // [n_max, d_dec]
  std::vector<TransformerBlock<T>> blocks;
  LayerNorm<T> norm;
  Linear<T> head;           // d_dec -> patch_dim

  MimDecoder() = default;
  MimDecoder(std::size_t width, std::size_t dec_width, std::size_t dec_layers, std::size_t dec_heads,
             std::size_t n_max, std::size_t patch_dim, Rng& rng, T eps = T(1e-6))
      : adapter(width, dec_width, rng),
        mask_token(make_param<T>({dec_width})),
        pos(make_param<T>({n_max, dec_width})),
        norm(dec_width, eps),
        head(dec_width, patch_dim, rng) {
    if (dec_heads == 0 || dec_width % dec_heads != 0) throw std::invalid_argument("decoder width not divisible by heads");
    init_trunc_normal(mask_token, rng);
    init_trunc_normal(pos, rng);
    for (std::size_t l = 0; l < dec_layers; ++l) blocks.emplace_back(dec_width, dec_heads, 4, rng, eps);
  }

  // Reconstruction of all n patches: [B, n, patch_dim].
  BasicTensor<T> reconstruct(const BasicTensor<T>& h_image, const std::vector<MaskPlan>& plans) const {
    const std::size_t b = plans.size();
    const std::size_t n = plans.front().patch_count();
    const std::size_t n_kept = plans.front().image_kept.size();
    const std::size_t dd = pos.dim(1);
    if (n > pos.dim(0)) throw ShapeError("mim decoder: " + std::to_string(n) + " patches exceed position capacity");
    if (h_image.rank() != 3 || h_image.dim(0) != b || h_image.dim(1) != n_kept) {
      throw ShapeError("mim decoder: kept states " + to_string(h_image.shape()) + " do not match the mask plans");
    }
    // Rows [0, n_kept) of `pool` hold adapted kept states for a sample, rows
    // [n_kept, n) the mask embedding; `order` scatters them to patch order.
    auto adapted = adapter(h_image);
    auto masks = gather_rows(reshape(mask_token, {1, dd}), std::vector<std::size_t>(b * (n - n_kept), 0), {b, n - n_kept, dd});
    auto pool = concat<T>({adapted, masks}, 1);
    std::vector<std::size_t> order(b * n);
    for (std::size_t i = 0; i < b; ++i) {
      const auto& plan = plans[i];
      if (plan.patch_count() != n || plan.image_kept.size() != n_kept) throw ShapeError("mim decoder: ragged mask plans");
      for (std::size_t j = 0; j < n_kept; ++j) order.at(i * n + plan.image_kept[j]) = i * n + j;
      for (std::size_t j = 0; j < plan.image_masked.size(); ++j) order.at(i * n + plan.image_masked[j]) = i * n + n_kept + j;
    }
    auto x = gather_rows(pool, std::move(order), {b, n, dd});
    x = add(x, detail::leading_rows(pos, n));
    for (const auto& blk : blocks) x = blk(x, {});
    return head(norm(x));
  }

  // Predictions for the masked patches only, in plan order: [B, n_masked, patch_dim].
  BasicTensor<T> operator()(const BasicTensor<T>& h_image, const std::vector<MaskPlan>& plans) const {
    auto full = reconstruct(h_image, plans);
    const std::size_t b = plans.size(), n = plans.front().patch_count();
    const std::size_t nm = plans.front().image_masked.size();
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t p : plans[i].image_masked) rows.push_back(i * n + p);
    return gather_rows(full, std::move(rows), {b, nm, full.dim(2)});
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    adapter.collect(out, prefix + ".adapter");
    out.push_back({prefix + ".mask_token", &mask_token, false});
    out.push_back({prefix + ".pos", &pos, true});
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].collect(out, prefix + ".blocks." + std::to_string(l));
    norm.collect(out, prefix + ".norm");
    head.collect(out, prefix + ".head");
  }
};

// Mean NLL of the original ids at masked text positions. h_text: [B, m, d].
template <typename T>
BasicTensor<T> mlm_loss(const BasicTensor<T>& h_text, const std::vector<MaskPlan>& plans,
                        const std::vector<data::TokenId>& target_ids, const Linear<T>& head) {
  const std::size_t b = h_text.dim(0), m = h_text.dim(1), d = h_text.dim(2);
  std::vector<std::size_t> rows, targets;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t pos : plans.at(i).text_masked) {
      rows.push_back(i * m + pos);
      targets.push_back(static_cast<std::size_t>(target_ids.at(i * m + pos)));
    }
  if (rows.empty()) throw ContractError("mlm_loss: no masked text positions");
  const std::size_t k = rows.size();
  return cross_entropy(head(gather_rows(h_text, std::move(rows), {k, d})), targets);
}

// Pixel targets of every masked patch, in plan order.
template <typename T>
std::vector<T> mim_targets(const MultimodalBatch& batch, const std::vector<MaskPlan>& plans, bool normalize = false) {
  std::vector<T> out;
  for (std::size_t i = 0; i < plans.size(); ++i)
    for (std::size_t p : plans[i].image_masked) {
      auto px = batch.patch(i, p);
      double mu = 0, var = 0;
      if (normalize) {
        for (float v : px) mu += v;
        mu /= static_cast<double>(px.size());
        for (float v : px) var += (v - mu) * (v - mu);
        var /= static_cast<double>(px.size());
      }
      for (float v : px) out.push_back(normalize ? static_cast<T>((v - mu) / std::sqrt(var + 1e-6)) : static_cast<T>(v));
    }
  return out;
}

// Mean over masked patches of per-patch mean squared pixel error. Kept
// patches never enter the loss.
template <typename T>
BasicTensor<T> mim_loss(const BasicTensor<T>& h_image, const std::vector<MaskPlan>& plans, const std::vector<T>& targets,
                        const MimDecoder<T>& decoder) {
  if (plans.empty() || plans.front().image_masked.empty()) throw ContractError("mim_loss: no masked patches");
  return mse(decoder(h_image, plans), targets);
}

// Mean 2-way NLL of the match labels from h_CLS: [B, d].
template <typename T>
BasicTensor<T> itm_loss(const BasicTensor<T>& h_cls, const std::vector<std::size_t>& labels, const Linear<T>& head) {
  return cross_entropy(head(h_cls), labels);
}

// Per-sample image assignment for image-text matching: y = 1 keeps the
// aligned image, y = 0 takes a different in-batch image.
struct ItmAssignment {
  std::vector<std::size_t> image_of;
  std::vector<std::size_t> labels;
  bool degenerate = false;  // batch of one: no negative possible
};

inline ItmAssignment itm_negatives(std::size_t batch, Rng& rng, double swap_prob = 0.5) {
  ItmAssignment a;
  a.image_of.resize(batch);
  a.labels.assign(batch, 1);
  std::iota(a.image_of.begin(), a.image_of.end(), 0);
  if (batch < 2) {
    a.degenerate = true;
    return a;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> other(0, batch - 2);
  for (std::size_t i = 0; i < batch; ++i) {
    if (unit(rng) >= swap_prob) continue;
    std::size_t j = other(rng);
    if (j >= i) ++j;
    a.image_of[i] = j;
    a.labels[i] = 0;
  }
  return a;
}

}  // namespace vlc
