#include "support.hpp"

namespace vlc {
namespace {

template <typename T>
void zero(Linear<T>& l) {
  for (auto& v : l.weight.mutable_data()) v = 0;
  for (auto& v : l.bias.mutable_data()) v = 0;
}

struct Rig {
  ModelConfig cfg = test::tiny_model(7, 1);
  VlcModel<double> model{cfg, 3};
  std::mt19937_64 rng{11};
  MultimodalBatch batch = test::random_batch(4, cfg, rng, 5);
};

TEST(Mlm, UniformHeadGivesLogVocab) {
  Rig r;
  zero(r.model.mlm_head);
  Rng m(1);
  auto plans = make_batch_plans(4, 4, r.batch.valid, m);
  auto enc = r.model.encoder.encode(r.model.token_embed(r.batch.ids, 4), r.batch.valid,
                                    r.model.patch_embed(r.batch.patch_tensor<double>()), plans);
  EXPECT_NEAR(mlm_loss(enc.h_text, plans, r.batch.ids, r.model.mlm_head).item(), std::log(7.0), 1e-12);
}

TEST(Mlm, MatchesSoftmaxNllOracle) {
  Rig r;
  std::vector<MaskPlan> plans(4, MaskPlan::full(4));
  plans[0].text_masked = {1, 3};
  plans[2].text_masked = {2};
  auto enc = r.model.forward_full(r.batch);
  const double loss = mlm_loss(enc.h_text, plans, r.batch.ids, r.model.mlm_head).item();

  const std::size_t m = r.batch.text_len, d = 16, v = 7;
  auto h = enc.h_text.data();
  auto w = r.model.mlm_head.weight.data(), b = r.model.mlm_head.bias.data();
  double total = 0;
  for (auto [row, pos] : std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 3}, {2, 2}}) {
    std::vector<double> z(v);
    for (std::size_t o = 0; o < v; ++o) {
      z[o] = b[o];
      for (std::size_t k = 0; k < d; ++k) z[o] += h[(row * m + pos) * d + k] * w[k * v + o];
    }
    double lse = 0;
    for (double zo : z) lse += std::exp(zo);
    total += std::log(lse) - z[static_cast<std::size_t>(r.batch.ids[row * m + pos])];
  }
  EXPECT_NEAR(loss, total / 3, 1e-6);
}

TEST(Mlm, EmptyMaskIsAContractError) {
  Rig r;
  std::vector<MaskPlan> plans(4, MaskPlan::full(4));
  auto enc = r.model.forward_full(r.batch);
  EXPECT_THROW(mlm_loss(enc.h_text, plans, r.batch.ids, r.model.mlm_head), ContractError);
}

TEST(Mlm, UnmaskedRowsGetNoGradientFromTheHead) {
  Rig r;
  BasicTensor<double> h({1, 4, 16}, 0.0, true);
  std::mt19937_64 rng(2);
  for (auto& x : h.mutable_data()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  std::vector<MaskPlan> plans(1);
  plans[0].text_masked = {2};
  backward(mlm_loss(h, plans, std::vector<data::TokenId>{1, 4, 5, 6}, r.model.mlm_head));
  for (std::size_t t = 0; t < 4; ++t) {
    double norm = 0;
    for (std::size_t k = 0; k < 16; ++k) norm += std::abs(h.grad()[t * 16 + k]);
    if (t == 2)
      EXPECT_GT(norm, 0.0);
    else
      EXPECT_EQ(norm, 0.0);
  }
}

TEST(Itm, UniformHeadGivesLogTwo) {
  Rig r;
  zero(r.model.itm_head);
  auto enc = r.model.forward_full(r.batch);
  EXPECT_NEAR(itm_loss(enc.h_cls, {1, 0, 1, 0}, r.model.itm_head).item(), std::log(2.0), 1e-12);
}

TEST(Itm, MatchesTwoClassOracle) {
  std::mt19937_64 rng(4);
  auto h = test::random_tensor({3, 5}, rng, -1, 1, false);
  Rng init(1);
  Linear<double> head(5, 2, init);
  const std::vector<std::size_t> y = {1, 0, 1};
  double ref = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double z[2];
    for (std::size_t c = 0; c < 2; ++c) {
      z[c] = head.bias.data()[c];
      for (std::size_t k = 0; k < 5; ++k) z[c] += h.data()[i * 5 + k] * head.weight.data()[k * 2 + c];
    }
    ref += std::log(std::exp(z[0]) + std::exp(z[1])) - z[y[i]];
  }
  EXPECT_NEAR(itm_loss(h, y, head).item(), ref / 3, 1e-6);
}

TEST(Itm, SeparatedLogitsDriveLossToZero) {
  BasicTensor<double> h({2, 1}, std::vector<double>{1, -1});
  Linear<double> head;
  head.weight = BasicTensor<double>({1, 2}, std::vector<double>{-40, 40});
  head.bias = BasicTensor<double>({2}, 0.0);
  EXPECT_LT(itm_loss(h, {1, 0}, head).item(), 1e-30);
}

TEST(ItmNegatives, SwapProbabilityContracts) {
  Rng rng(5);
  auto keep = itm_negatives(6, rng, 0.0);
  EXPECT_EQ(keep.labels, std::vector<std::size_t>(6, 1));
  auto pair = itm_negatives(2, rng, 1.0);
  EXPECT_EQ(pair.image_of, (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(pair.labels, (std::vector<std::size_t>{0, 0}));
  auto single = itm_negatives(1, rng, 1.0);
  EXPECT_TRUE(single.degenerate);
  EXPECT_EQ(single.labels, std::vector<std::size_t>{1});
}

TEST(ItmNegatives, NegativeFractionWithinThreeSigma) {
  Rng rng(6);
  std::size_t neg = 0, total = 0;
  for (int d = 0; d < 10000; ++d) {
    auto a = itm_negatives(4, rng);
    for (std::size_t i = 0; i < 4; ++i, ++total) {
      neg += a.labels[i] == 0;
      EXPECT_EQ(a.labels[i] == 0, a.image_of[i] != i);
    }
  }
  const double sigma = std::sqrt(0.25 / static_cast<double>(total));
  EXPECT_NEAR(static_cast<double>(neg) / static_cast<double>(total), 0.5, 3 * sigma);
}

TEST(Mim, ZeroPredictionGivesMeanSquare) {
  Rig r;
  zero(r.model.mim_decoder.head);
  Rng m(7);
  auto plans = make_batch_plans(4, 4, r.batch.valid, m);
  auto enc = r.model.encoder.encode(std::nullopt, {}, r.model.patch_embed(r.batch.patch_tensor<double>()), plans);
  const auto targets = mim_targets<double>(r.batch, plans);
  double ref = 0;
  for (double v : targets) ref += v * v;
  EXPECT_NEAR(mim_loss(enc.h_image, plans, targets, r.model.mim_decoder).item(), ref / static_cast<double>(targets.size()),
              1e-12);
}

TEST(Mim, MatchesTwoLoopOracleAndIgnoresKeptPatches) {
  Rig r;
  Rng m(8);
  auto plans = make_batch_plans(4, 4, r.batch.valid, m);
  auto enc = r.model.encoder.encode(std::nullopt, {}, r.model.patch_embed(r.batch.patch_tensor<double>()), plans);
  const auto targets = mim_targets<double>(r.batch, plans);
  auto pred = r.model.mim_decoder(enc.h_image, plans);
  double ref = 0;
  std::size_t k = 0;
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t p : plans[b].image_masked) {
      double e = 0;
      for (std::size_t j = 0; j < r.batch.patch_dim; ++j, ++k) {
        const double diff = pred.data()[k] - r.batch.patch(b, p)[j];
        e += diff * diff;
      }
      ref += e / static_cast<double>(r.batch.patch_dim);
    }
  ref /= static_cast<double>(4 * plans[0].image_masked.size());
  EXPECT_NEAR(mim_loss(enc.h_image, plans, targets, r.model.mim_decoder).item(), ref, 1e-6);
}

TEST(Mim, TeacherForcedDecoderGivesZeroLoss) {
  Rig r;
  zero(r.model.mim_decoder.head);
  std::vector<MaskPlan> plans(1);
  plans[0].image_kept = {0, 1, 2};
  plans[0].image_masked = {3};
  auto one = select(r.batch, {0});
  for (std::size_t j = 0; j < one.patch_dim; ++j) r.model.mim_decoder.head.bias.mutable_data()[j] = one.patch(0, 3)[j];
  auto enc = r.model.encoder.encode(std::nullopt, {}, r.model.patch_embed(one.patch_tensor<double>()), plans);
  EXPECT_NEAR(mim_loss(enc.h_image, plans, mim_targets<double>(one, plans), r.model.mim_decoder).item(), 0.0, 1e-14);
}

TEST(Mim, InvariantToKeptOrdering) {
  Rig r;
  std::mt19937_64 rng(9);
  auto h = test::random_tensor({1, 2, 16}, rng, -1, 1, false);
  MaskPlan a;
  a.image_kept = {0, 2};
  a.image_masked = {1, 3};
  MaskPlan b = a;
  b.image_kept = {2, 0};
  auto swapped = gather_rows(h, {1, 0}, {1, 2, 16});
  auto pa = r.model.mim_decoder(h, {a});
  auto pb = r.model.mim_decoder(swapped, {b});
  for (std::size_t i = 0; i < pa.numel(); ++i) EXPECT_NEAR(pa.data()[i], pb.data()[i], 1e-12);
}

TEST(Pretrain, UniformHeadsComposeAnalyticParts) {
  Rig r;
  zero(r.model.mlm_head);
  zero(r.model.itm_head);
  Rng rng(10);
  auto draw = draw_pretrain(r.batch, 7, rng);
  auto losses = compute_pretrain_losses(r.model, r.batch, draw);
  const double mim = losses.mim->item();
  EXPECT_NEAR(losses.mlm->item(), std::log(7.0), 1e-12);
  EXPECT_NEAR(losses.itm->item(), std::log(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(losses.total.item(), losses.mlm->item() + losses.itm->item() + mim);
}

TEST(Pretrain, ZeroMaskingLeavesOnlyItm) {
  Rig r;
  PretrainOptions opt;
  opt.masking.image_ratio = 0;
  opt.masking.text_prob = 0;
  Rng rng(11);
  auto losses = compute_pretrain_losses(r.model, r.batch, draw_pretrain(r.batch, 7, rng, opt), opt);
  EXPECT_FALSE(losses.mlm);
  EXPECT_FALSE(losses.mim);
  EXPECT_DOUBLE_EQ(losses.total.item(), losses.itm->item());
}

TEST(Pretrain, EndToEndGradientMatchesFiniteDifferences) {
  auto cfg = test::tiny_model(9, 1);
  VlcModel<double> model(cfg, 4);
  std::mt19937_64 rng(12);
  auto batch = test::random_batch(3, cfg, rng, 4);
  Rng mr(13);
  auto draw = draw_pretrain(batch, 9, mr);
  auto params = model.parameters();
  std::vector<BasicTensor<double>*> tensors;
  for (auto& p : params) tensors.push_back(p.tensor);
  auto loss = [&] { return compute_pretrain_losses(model, batch, draw).total; };
  EXPECT_LT(test::max_grad_error(loss, tensors), 1e-5);
}

TEST(Pretrain, TotalDecreasesWhenOverfittingEightSamples) {
  auto items = data::items_of(data::generate_synthetic(8, 3));
  std::vector<std::string> caps;
  for (const auto& i : items) caps.push_back(i.caption);
  const auto vocab = data::build_vocab(caps, 1);
  RunConfig c;
  c.layers = 2;
  c.width = 32;
  VlcModel<float> model(c.model(vocab.size()), 5);
  auto batch = make_batch(std::span<const data::CaptionedImage>(items), vocab, c.text_len, c.patch);
  // One fixed draw, so the loss depends on the parameters only.
  Rng rng(1);
  auto draw = draw_pretrain(batch, vocab.size(), rng);
  auto params = model.parameters();
  AdamW<float> opt(c.adamw());
  double prev = 1e9;
  for (int s = 0; s < 50; ++s) {
    auto losses = compute_pretrain_losses(model, batch, draw);
    const double now = losses.total.item();
    EXPECT_LT(now, prev) << "step " << s;
    prev = now;
    backward(losses.total);
    opt.step(params, 1e-3);
    zero_grads(params);
  }
}

}  // namespace
}  // namespace vlc
