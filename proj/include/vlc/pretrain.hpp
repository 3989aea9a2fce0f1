#pragma once

#include <optional>
#include <vector>

#include "vlc/model.hpp"

namespace vlc {

struct PretrainOptions {
  MaskingConfig masking;
  double itm_swap_prob = 0.5;
  bool use_mlm = true;
  bool use_mim = true;
  bool use_itm = true;
  bool normalize_pixel_targets = false;
};

// All random choices of one pretraining step, drawn up front so the loss is a
// deterministic function of the parameters.
struct PretrainDraw {
  std::vector<MaskPlan> plans;
  std::vector<data::TokenId> corrupted_ids;
  ItmAssignment itm;
};

inline PretrainDraw draw_pretrain(const MultimodalBatch& batch, std::size_t vocab_size, Rng& rng,
                                  const PretrainOptions& opt = {}) {
  MaskingConfig masking = opt.masking;
  if (!opt.use_mlm) masking.text_prob = 0.0;
  if (!opt.use_mim) masking.image_ratio = 0.0;
  PretrainDraw d;
  d.plans = make_batch_plans(batch.size, batch.patches_per_image, batch.valid, rng, masking);
  d.corrupted_ids = corrupt_tokens(batch.ids, d.plans, vocab_size, rng, masking);
  d.itm = itm_negatives(batch.size, rng, opt.itm_swap_prob);
  return d;
}

template <typename T>
struct PretrainLosses {
  std::optional<BasicTensor<T>> mlm;
  std::optional<BasicTensor<T>> mim;
  std::optional<BasicTensor<T>> itm;
  BasicTensor<T> total;

  static double value(const std::optional<BasicTensor<T>>& t) { return t ? static_cast<double>(t->item()) : 0.0; }
};

// Masked forward for MLM + MIM, then a clean forward on the ITM-mixed batch.
// total = L_MLM + L_ITM + L_MIM with unit weights; absent terms are skipped.
template <typename T>
PretrainLosses<T> compute_pretrain_losses(const VlcModel<T>& model, const MultimodalBatch& batch,
                                          const PretrainDraw& draw, const PretrainOptions& opt = {}) {
  PretrainLosses<T> out;
  std::size_t text_targets = 0;
  for (const auto& p : draw.plans) text_targets += p.text_masked.size();
  const bool any_mlm = opt.use_mlm && text_targets > 0;
  const bool any_mim = opt.use_mim && !draw.plans.front().image_masked.empty();
  if (any_mlm || any_mim) {
    auto text = model.token_embed(draw.corrupted_ids, batch.size);
    auto patches = model.patch_embed(batch.patch_tensor<T>());
    auto enc = model.encoder.encode(text, batch.valid, patches, draw.plans);
    if (any_mlm) out.mlm = mlm_loss(enc.h_text, draw.plans, batch.ids, model.mlm_head);
    if (any_mim) {
      out.mim = mim_loss(enc.h_image, draw.plans, mim_targets<T>(batch, draw.plans, opt.normalize_pixel_targets),
                         model.mim_decoder);
    }
  }
  if (opt.use_itm) {
    auto enc = model.forward_full(batch, &draw.itm.image_of);
    out.itm = itm_loss(enc.h_cls, draw.itm.labels, model.itm_head);
  }
  std::optional<BasicTensor<T>> total;
  for (const auto* term : {&out.mlm, &out.itm, &out.mim}) {
    if (!*term) continue;
    total = total ? add(*total, **term) : **term;
  }
  if (!total) throw ContractError("pretrain step with every objective disabled");
  out.total = *total;
  return out;
}

// One forward/backward; gradients accumulate into the model parameters.
template <typename T>
PretrainLosses<T> pretrain_step(const MultimodalBatch& batch, VlcModel<T>& model, Rng& rng,
                                const PretrainOptions& opt = {}) {
  auto draw = draw_pretrain(batch, model.cfg.vocab_size, rng, opt);
  auto losses = compute_pretrain_losses(model, batch, draw, opt);
  backward(losses.total);
  return losses;
}

// Image-only masked reconstruction loss (text branch absent), used for the
// warm-start stage.
template <typename T>
BasicTensor<T> mim_only_loss(const VlcModel<T>& model, const MultimodalBatch& batch, const std::vector<MaskPlan>& plans,
                             bool normalize = false) {
  auto patches = model.patch_embed(batch.patch_tensor<T>());
  auto enc = model.encoder.encode(std::nullopt, {}, patches, plans);
  return mim_loss(enc.h_image, plans, mim_targets<T>(batch, plans, normalize), model.mim_decoder);
}

}  // namespace vlc
