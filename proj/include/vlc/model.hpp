#pragma once

#include <string>

#include "vlc/embedding.hpp"
#include "vlc/encoder.hpp"
#include "vlc/objectives.hpp"

namespace vlc {

struct ModelConfig {
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::size_t patch = 8;
  std::size_t vocab_size = 0;
  EncoderConfig encoder;
  std::size_t decoder_layers = 2;
  std::size_t decoder_width = 32;
  std::size_t decoder_heads = 4;
  double ln_eps = 1e-6;

  std::size_t grid() const { return image_size / patch; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t patch_dim() const { return patch * patch * channels; }

  void validate() const {
    if (patch == 0 || image_size % patch != 0) {
      throw std::invalid_argument("image size " + std::to_string(image_size) + " is not divisible by patch " +
                                  std::to_string(patch));
    }
    if (vocab_size <= 4) throw std::invalid_argument("vocab_size must exceed the 4 reserved ids");
    if (encoder.n_max < num_patches()) throw std::invalid_argument("encoder n_max below patch count");
    if (encoder.m_max < 2) throw std::invalid_argument("encoder m_max must be >= 2");
    encoder.validate();
  }
};

// Embedders, merged-attention encoder and the three pretraining heads.
template <typename T>
struct VlcModel {
  ModelConfig cfg;
  PatchEmbedder<T> patch_embed;
  TokenEmbedder<T> token_embed;
  Encoder<T> encoder;
  Linear<T> mlm_head;
  MimDecoder<T> mim_decoder;
  Linear<T> itm_head;

  VlcModel() = default;
  VlcModel(const ModelConfig& c, std::uint64_t seed) : cfg(c) {
    cfg.validate();
    Rng rng(seed);
    const T eps = static_cast<T>(cfg.ln_eps);
    const std::size_t d = cfg.encoder.width;
    patch_embed = PatchEmbedder<T>(cfg.patch_dim(), cfg.encoder.n_max, d, rng, eps);
    token_embed = TokenEmbedder<T>(cfg.vocab_size, cfg.encoder.m_max, d, rng, eps);
    encoder = Encoder<T>(cfg.encoder, rng, eps);
    mlm_head = Linear<T>(d, cfg.vocab_size, rng);
    mim_decoder = MimDecoder<T>(d, cfg.decoder_width, cfg.decoder_layers, cfg.decoder_heads, cfg.encoder.n_max,
                                cfg.patch_dim(), rng, eps);
    itm_head = Linear<T>(d, 2, rng);
  }

  // Visual embedder and encoder blocks, in the order used for the closed-form count.
  ParamList<T> backbone_parameters() {
    ParamList<T> out;
    patch_embed.collect(out, "patch_embed");
    encoder.collect(out, "encoder");
    return out;
  }

  ParamList<T> parameters() {
    ParamList<T> out;
    patch_embed.collect(out, "patch_embed");
    token_embed.collect(out, "token_embed");
    encoder.collect(out, "encoder");
    mlm_head.collect(out, "mlm_head");
    mim_decoder.collect(out, "mim_decoder");
    itm_head.collect(out, "itm_head");
    return out;
  }

  // Full (unmasked) multimodal forward over a batch with images chosen by `image_of`.
  EncoderOutput<T> forward_full(const MultimodalBatch& batch, const std::vector<std::size_t>* image_of = nullptr,
                                bool trace = false) const {
    auto patches = image_of ? batch.patch_tensor<T>(*image_of) : batch.patch_tensor<T>();
    return encoder.encode_full(token_embed(batch.ids, batch.size), batch.valid, patch_embed(patches), trace);
  }
};

}  // namespace vlc
