#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "vlc/model.hpp"

namespace vlc {

// Candidates sorted by descending score; equal scores keep the lower index first.
inline std::vector<std::size_t> rank_candidates(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Zero-based rank of `truth` among the candidates.
inline std::size_t rank_of(std::span<const double> scores, std::size_t truth) {
  if (truth >= scores.size()) {
    throw std::out_of_range("ground-truth candidate " + std::to_string(truth) + " not among " +
                            std::to_string(scores.size()) + " candidates");
  }
  const auto order = rank_candidates(scores);
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin());
}

// scores is row-major [queries, candidates].
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return std::span<const double>(values).subspan(r * cols, cols); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  ScoreMatrix transposed() const {
    ScoreMatrix t{cols, rows, std::vector<double>(values.size())};
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) t.values[c * rows + r] = values[r * cols + c];
    return t;
  }
};

// Fraction of queries whose ground truth ranks in the top k, for each k.
inline std::map<std::size_t, double> recall_at_k(const ScoreMatrix& scores, const std::vector<std::size_t>& truth,
                                                 const std::vector<std::size_t>& ks) {
  if (truth.size() != scores.rows) {
    throw std::invalid_argument("recall_at_k: " + std::to_string(truth.size()) + " ground-truth ids for " +
                                std::to_string(scores.rows) + " queries");
  }
  if (scores.rows == 0) throw std::invalid_argument("recall_at_k: no queries");
  std::vector<std::size_t> ranks(scores.rows);
  for (std::size_t q = 0; q < scores.rows; ++q) ranks[q] = rank_of(scores.row(q), truth[q]);
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    std::size_t hit = 0;
    for (std::size_t r : ranks) hit += r < k;
    out[k] = static_cast<double>(hit) / static_cast<double>(ranks.size());
  }
  return out;
}

template <typename Pred, typename Label>
double accuracy(const std::vector<Pred>& predicted, const std::vector<Label>& labels) {
  if (predicted.size() != labels.size()) throw std::invalid_argument("accuracy: prediction and label counts differ");
  if (labels.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == static_cast<Pred>(labels[i]);
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

inline std::vector<std::size_t> argmax_rows(std::span<const float> logits, std::size_t cols) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r * cols < logits.size(); ++r) {
    auto row = logits.subspan(r * cols, cols);
    out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return out;
}

// Match score log p(match) - log p(mismatch) for every row of the batch, with
// images taken from image_of (or the aligned images).
template <typename T>
std::vector<double> itm_match_scores(const VlcModel<T>& model, const MultimodalBatch& batch,
                                     const std::vector<std::size_t>* image_of = nullptr) {
  NoGradGuard ng;
  auto logits = model.itm_head(model.forward_full(batch, image_of).h_cls);
  std::vector<double> out(batch.size);
  auto d = logits.data();
  for (std::size_t b = 0; b < batch.size; ++b) out[b] = static_cast<double>(d[2 * b + 1]) - static_cast<double>(d[2 * b]);
  return out;
}

// Balanced match set: every caption with its own image (label 1) and with
// image (i + shift) mod N (label 0).
struct ItmEvalSet {
  std::vector<std::size_t> image_of;
  std::vector<std::size_t> labels;
};

inline ItmEvalSet balanced_itm_set(std::size_t n, std::size_t shift = 1) {
  if (n < 2) throw std::invalid_argument("balanced ITM set needs at least two items");
  shift = shift % n == 0 ? 1 : shift % n;
  ItmEvalSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.image_of.push_back(i);
    s.labels.push_back(1);
  }
  for (std::size_t i = 0; i < n; ++i) {
    s.image_of.push_back((i + shift) % n);
    s.labels.push_back(0);
  }
  return s;
}

// Match-prediction accuracy on `batch` (size N) doubled into the balanced set.
template <typename T>
double itm_accuracy(const VlcModel<T>& model, const MultimodalBatch& batch, std::size_t shift = 1) {
  const auto set = balanced_itm_set(batch.size, shift);
  MultimodalBatch twice = batch;
  twice.size = 2 * batch.size;
  twice.ids.insert(twice.ids.end(), batch.ids.begin(), batch.ids.end());
  twice.valid.insert(twice.valid.end(), batch.valid.begin(), batch.valid.end());
  const auto scores = itm_match_scores(model, twice, &set.image_of);
  std::vector<std::size_t> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] > 0 ? 1 : 0;
  return accuracy(pred, set.labels);
}

// Match scores of every caption against every image: [captions, images].
template <typename T>
ScoreMatrix itm_score_matrix(const VlcModel<T>& model, const MultimodalBatch& batch) {
  const std::size_t n = batch.size;
  ScoreMatrix m{n, n, std::vector<double>(n * n)};
  for (std::size_t shift = 0; shift < n; ++shift) {
    std::vector<std::size_t> image_of(n);
    for (std::size_t i = 0; i < n; ++i) image_of[i] = (i + shift) % n;
    const auto s = itm_match_scores(model, batch, &image_of);
    for (std::size_t i = 0; i < n; ++i) m.values[i * n + image_of[i]] = s[i];
  }
  return m;
}

// Masked-token accuracy with one word masked at a time and the full image
// visible: every valid word position of every caption is one prediction.
template <typename T>
double mlm_accuracy(const VlcModel<T>& model, const MultimodalBatch& batch) {
  NoGradGuard ng;
  const std::size_t m = batch.text_len, n = batch.patches_per_image;
  auto patches = model.patch_embed(batch.patch_tensor<T>());
  std::size_t hit = 0, total = 0;
  for (std::size_t pos = 1; pos < m; ++pos) {
    std::vector<MaskPlan> plans;
    std::vector<data::TokenId> ids = batch.ids;
    std::vector<std::size_t> rows;
    for (std::size_t b = 0; b < batch.size; ++b) {
      plans.push_back(MaskPlan::full(n));
      if (batch.valid[b * m + pos]) {
        ids[b * m + pos] = data::kMask;
        rows.push_back(b);
      }
    }
    if (rows.empty()) continue;
    auto enc = model.encoder.encode(model.token_embed(ids, batch.size), batch.valid, patches, plans);
    auto logits = model.mlm_head(enc.h_text);
    const std::size_t v = model.cfg.vocab_size;
    auto d = logits.data();
    for (std::size_t b : rows) {
      auto row = d.subspan((b * m + pos) * v, v);
      const auto pred = static_cast<data::TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
      hit += pred == batch.ids[b * m + pos];
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("mlm_accuracy: no word positions to evaluate");
  return static_cast<double>(hit) / static_cast<double>(total);
}

struct MimEval {
  double mse = 0;       // model reconstruction of masked patches
  double baseline = 0;  // each image's mean pixel value as the prediction
};

// Held-out masked-patch MSE, with or without the caption, against the
// per-image mean-pixel predictor.
template <typename T>
MimEval mim_heldout(const VlcModel<T>& model, const MultimodalBatch& batch, const std::vector<MaskPlan>& plans,
                    bool with_text = true) {
  NoGradGuard ng;
  const std::size_t pd = batch.patch_dim, n = batch.patches_per_image;
  std::optional<BasicTensor<T>> text;
  if (with_text) text = model.token_embed(batch.ids, batch.size);
  auto enc = model.encoder.encode(text, batch.valid, model.patch_embed(batch.patch_tensor<T>()), plans);
  const auto pred = model.mim_decoder(enc.h_image, plans);
  const auto p = pred.data();
  MimEval out;
  std::size_t k = 0;
  for (std::size_t b = 0; b < batch.size; ++b) {
    double mean = 0;
    for (std::size_t j = 0; j < n; ++j)
      for (float v : batch.patch(b, j)) mean += v;
    mean /= static_cast<double>(n * pd);
    for (std::size_t j : plans[b].image_masked)
      for (float v : batch.patch(b, j)) {
        const double e = static_cast<double>(p[k++]) - v;
        out.mse += e * e;
        out.baseline += (mean - v) * (mean - v);
      }
  }
  if (k == 0) throw std::invalid_argument("mim_heldout: no masked patches");
  out.mse /= static_cast<double>(k);
  out.baseline /= static_cast<double>(k);
  return out;
}

}  // namespace vlc
