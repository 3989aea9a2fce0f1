#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "vlc/data/image.hpp"
#include "vlc/data/vocab.hpp"
#include "vlc/nn.hpp"

namespace vlc {

// Flattened non-overlapping patches in row-major grid order (top-left first).
// Each patch is laid out (row, column, channel).
struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t patch = 0;
  std::size_t channels = 0;
  std::vector<float> values;  // [rows * cols, patch * patch * channels]

  std::size_t count() const { return rows * cols; }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(values).subspan(i * patch_dim(), patch_dim());
  }
};

inline PatchGrid patchify(const data::Image& img, std::size_t patch) {
  if (patch == 0 || img.height % patch != 0 || img.width % patch != 0) {
    throw ShapeError("patchify: image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                     " is not divisible by patch size " + std::to_string(patch));
  }
  PatchGrid g{img.height / patch, img.width / patch, patch, img.channels, {}};
  g.values.reserve(img.pixels.size());
  for (std::size_t gy = 0; gy < g.rows; ++gy)
    for (std::size_t gx = 0; gx < g.cols; ++gx)
      for (std::size_t py = 0; py < patch; ++py)
        for (std::size_t px = 0; px < patch; ++px)
          for (std::size_t c = 0; c < img.channels; ++c) g.values.push_back(img.at(gy * patch + py, gx * patch + px, c));
  return g;
}

inline data::Image unpatchify(const PatchGrid& g) {
  data::Image img(g.rows * g.patch, g.cols * g.patch, g.channels);
  std::size_t k = 0;
  for (std::size_t gy = 0; gy < g.rows; ++gy)
    for (std::size_t gx = 0; gx < g.cols; ++gx)
      for (std::size_t py = 0; py < g.patch; ++py)
        for (std::size_t px = 0; px < g.patch; ++px)
          for (std::size_t c = 0; c < g.channels; ++c) img.at(gy * g.patch + py, gx * g.patch + px, c) = g.values[k++];
  return img;
}

namespace detail {

// Rows 0..count-1 of a position table.
template <typename T>
BasicTensor<T> leading_rows(const BasicTensor<T>& table, std::size_t count) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  return gather_rows(table, std::move(idx), {count, table.dim(1)});
}

}  // namespace detail

// Linear patch projection plus per-position and modality-type embeddings,
// normalized after the three-term sum.
template <typename T>
struct PatchEmbedder {
  Linear<T> projection;
  BasicTensor<T> pos;   // [n_max, d]
  BasicTensor<T> type;  // [d]
  LayerNorm<T> norm;

  PatchEmbedder() = default;
  PatchEmbedder(std::size_t patch_dim, std::size_t n_max, std::size_t width, Rng& rng, T eps = T(1e-6))
      : projection(patch_dim, width, rng),
        pos(make_param<T>({n_max, width})),
        type(make_param<T>({width})),
        norm(width, eps) {
    init_trunc_normal(pos, rng);
    init_trunc_normal(type, rng);
  }

  std::size_t capacity() const { return pos.dim(0); }

  // patches: [B, n, patch_dim] -> [B, n, d]
  BasicTensor<T> operator()(const BasicTensor<T>& patches) const {
    if (patches.rank() != 3) throw ShapeError("embed_patches: expected [B, n, patch_dim], got " + to_string(patches.shape()));
    const std::size_t n = patches.dim(1);
    if (n > capacity()) {
      throw ShapeError("embed_patches: " + std::to_string(n) + " patches exceed position capacity " +
                       std::to_string(capacity()));
    }
    auto x = add(projection(patches), detail::leading_rows(pos, n));
    return norm(add(x, type));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    projection.collect(out, prefix + ".projection");
    out.push_back({prefix + ".pos", &pos, true});
    out.push_back({prefix + ".type", &type, false});
    norm.collect(out, prefix + ".norm");
  }
};

// Word lookup plus per-position and modality-type embeddings.
template <typename T>
struct TokenEmbedder {
  BasicTensor<T> table;  // [|V|, d]
  BasicTensor<T> pos;    // [m_max, d]
  BasicTensor<T> type;   // [d]
  LayerNorm<T> norm;

  TokenEmbedder() = default;
  TokenEmbedder(std::size_t vocab_size, std::size_t m_max, std::size_t width, Rng& rng, T eps = T(1e-6))
      : table(make_param<T>({vocab_size, width})),
        pos(make_param<T>({m_max, width})),
        type(make_param<T>({width})),
        norm(width, eps) {
    init_trunc_normal(table, rng);
    init_trunc_normal(pos, rng);
    init_trunc_normal(type, rng);
  }

  std::size_t vocab_size() const { return table.dim(0); }
  std::size_t capacity() const { return pos.dim(0); }

  // ids: B rows of m ids each -> [B, m, d]
  BasicTensor<T> operator()(const std::vector<data::TokenId>& ids, std::size_t batch) const {
    if (batch == 0 || ids.size() % batch != 0) throw ShapeError("embed_tokens: ragged id batch");
    const std::size_t m = ids.size() / batch;
    if (m > capacity()) {
      throw ShapeError("embed_tokens: " + std::to_string(m) + " tokens exceed position capacity " +
                       std::to_string(capacity()));
    }
    std::vector<std::size_t> rows(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab_size()) {
        throw ShapeError("embed_tokens: id " + std::to_string(ids[i]) + " outside vocabulary of " +
                         std::to_string(vocab_size()));
      }
      rows[i] = static_cast<std::size_t>(ids[i]);
    }
    auto w = gather_rows(table, std::move(rows), {batch, m, table.dim(1)});
    return norm(add(add(w, detail::leading_rows(pos, m)), type));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    out.push_back({prefix + ".table", &table, true});
    out.push_back({prefix + ".pos", &pos, true});
    out.push_back({prefix + ".type", &type, false});
    norm.collect(out, prefix + ".norm");
  }
};

}  // namespace vlc
