#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vlc/vlc.hpp"

namespace vlc::test {

inline BasicTensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                         bool grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = u(rng);
  return BasicTensor<double>(std::move(shape), std::move(v), grad);
}

// Largest |analytic - central difference| over every element of `inputs`,
// scaled by max(1, |numeric|).
inline double max_grad_error(const std::function<BasicTensor<double>()>& loss,
                             std::vector<BasicTensor<double>*> inputs, double h = 1e-6) {
  for (auto* t : inputs) t->zero_grad();
  backward(loss());
  double worst = 0;
  for (auto* t : inputs) {
    std::vector<double> analytic(t->numel(), 0.0);
    if (t->has_grad()) analytic.assign(t->grad().begin(), t->grad().end());
    auto data = t->mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + h;
      const double up = loss().item();
      data[i] = keep - h;
      const double down = loss().item();
      data[i] = keep;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("vlc-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Small model config used across tests.
inline ModelConfig tiny_model(std::size_t vocab_size, std::size_t layers = 2) {
  ModelConfig c;
  c.image_size = 16;
  c.patch = 8;
  c.vocab_size = vocab_size;
  c.encoder.layers = layers;
  c.encoder.width = 16;
  c.encoder.heads = 2;
  c.encoder.mlp_ratio = 2;
  c.encoder.n_max = 4;
  c.encoder.m_max = 6;
  c.decoder_layers = 1;
  c.decoder_width = 8;
  c.decoder_heads = 2;
  return c;
}

// A pretraining run small enough for unit tests.
inline RunConfig tiny_run() {
  RunConfig c;
  c.image_size = 16;
  c.patch = 8;
  c.layers = 1;
  c.width = 16;
  c.heads = 2;
  c.mlp_ratio = 2;
  c.text_len = 8;
  c.decoder_layers = 1;
  c.decoder_width = 8;
  c.decoder_heads = 2;
  c.lr = 1e-3;
  c.steps = 6;
  c.batch_size = 4;
  c.log_every = 0;
  c.synthetic_count = 16;
  c.eval_count = 8;
  return c;
}

inline MultimodalBatch random_batch(std::size_t b, const ModelConfig& cfg, std::mt19937_64& rng,
                                    std::size_t pad_from = 0) {
  MultimodalBatch batch;
  batch.size = b;
  batch.patches_per_image = cfg.num_patches();
  batch.patch_dim = cfg.patch_dim();
  batch.text_len = cfg.encoder.m_max;
  std::uniform_real_distribution<float> px(0.0f, 1.0f);
  std::uniform_int_distribution<data::TokenId> word(static_cast<data::TokenId>(data::kReserved),
                                                    static_cast<data::TokenId>(cfg.vocab_size - 1));
  batch.patches.resize(b * batch.patches_per_image * batch.patch_dim);
  for (auto& v : batch.patches) v = px(rng);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < batch.text_len; ++t) {
      const bool pad = pad_from && t >= pad_from;
      batch.ids.push_back(t == 0 ? data::kCls : pad ? data::kPad : word(rng));
      batch.valid.push_back(pad ? 0 : 1);
    }
  return batch;
}

}  // namespace vlc::test
