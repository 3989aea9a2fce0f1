#pragma once

#include <span>
#include <vector>

#include "vlc/data/dataset.hpp"
#include "vlc/data/vocab.hpp"
#include "vlc/embedding.hpp"

namespace vlc {

// Image patch grids and encoded captions for B samples, all at one resolution.
struct MultimodalBatch {
  std::size_t size = 0;
  std::size_t patches_per_image = 0;
  std::size_t patch_dim = 0;
  std::size_t text_len = 0;
  std::vector<float> patches;         // [B, n, patch_dim]
  std::vector<data::TokenId> ids;     // [B, m]
  std::vector<std::uint8_t> valid;    // [B, m], 0 at PAD

  std::span<const float> patch(std::size_t b, std::size_t j) const {
    return std::span<const float>(patches).subspan((b * patches_per_image + j) * patch_dim, patch_dim);
  }

  template <typename T>
  BasicTensor<T> patch_tensor() const {
    return BasicTensor<T>({size, patches_per_image, patch_dim}, std::vector<T>(patches.begin(), patches.end()));
  }

  // Same captions, images taken from `image_of[b]`.
  template <typename T>
  BasicTensor<T> patch_tensor(const std::vector<std::size_t>& image_of) const {
    const std::size_t stride = patches_per_image * patch_dim;
    std::vector<T> out(size * stride);
    for (std::size_t b = 0; b < size; ++b)
      std::copy_n(patches.begin() + static_cast<std::ptrdiff_t>(image_of.at(b) * stride), stride,
                  out.begin() + static_cast<std::ptrdiff_t>(b * stride));
    return BasicTensor<T>({size, patches_per_image, patch_dim}, std::move(out));
  }
};

inline void append_sample(MultimodalBatch& batch, const data::Image& image, const data::EncodedText& text,
                          std::size_t patch) {
  auto grid = patchify(image, patch);
  if (batch.size == 0) {
    batch.patches_per_image = grid.count();
    batch.patch_dim = grid.patch_dim();
    batch.text_len = text.ids.size();
  } else if (grid.count() != batch.patches_per_image || grid.patch_dim() != batch.patch_dim ||
             text.ids.size() != batch.text_len) {
    throw ShapeError("make_batch: samples differ in resolution or caption length");
  }
  batch.patches.insert(batch.patches.end(), grid.values.begin(), grid.values.end());
  batch.ids.insert(batch.ids.end(), text.ids.begin(), text.ids.end());
  batch.valid.insert(batch.valid.end(), text.valid.begin(), text.valid.end());
  ++batch.size;
}

inline MultimodalBatch make_batch(std::span<const data::CaptionedImage> items, const std::vector<std::size_t>& indices,
                                  const data::Vocab& vocab, std::size_t text_len, std::size_t patch) {
  MultimodalBatch batch;
  for (std::size_t i : indices) append_sample(batch, items[i].image, data::encode(items[i].caption, vocab, text_len), patch);
  return batch;
}

// Rows `indices` of an already assembled batch.
inline MultimodalBatch select(const MultimodalBatch& all, const std::vector<std::size_t>& indices) {
  MultimodalBatch out;
  out.size = indices.size();
  out.patches_per_image = all.patches_per_image;
  out.patch_dim = all.patch_dim;
  out.text_len = all.text_len;
  const std::size_t stride = all.patches_per_image * all.patch_dim, m = all.text_len;
  out.patches.reserve(out.size * stride);
  for (std::size_t i : indices) {
    if (i >= all.size) throw std::out_of_range("select: row " + std::to_string(i) + " of " + std::to_string(all.size));
    out.patches.insert(out.patches.end(), all.patches.begin() + static_cast<std::ptrdiff_t>(i * stride),
                       all.patches.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
    out.ids.insert(out.ids.end(), all.ids.begin() + static_cast<std::ptrdiff_t>(i * m),
                   all.ids.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
    out.valid.insert(out.valid.end(), all.valid.begin() + static_cast<std::ptrdiff_t>(i * m),
                     all.valid.begin() + static_cast<std::ptrdiff_t>((i + 1) * m));
  }
  return out;
}

inline MultimodalBatch make_batch(std::span<const data::CaptionedImage> items, const data::Vocab& vocab,
                                  std::size_t text_len, std::size_t patch) {
  std::vector<std::size_t> all(items.size());
  std::iota(all.begin(), all.end(), 0);
  return make_batch(items, all, vocab, text_len, patch);
}

}  // namespace vlc
