#include <fstream>

#include "support.hpp"

namespace vlc {
namespace {

struct Rig {
  data::SyntheticConfig syn{16, 3, 0.1f};
  std::vector<data::SyntheticSample> samples = data::generate_synthetic(12, 5, syn);
  std::vector<data::CaptionedImage> items = data::items_of(samples);
  data::Vocab vocab = [this] {
    std::vector<std::string> corpus;
    for (const auto& it : items) corpus.push_back(it.caption);
    for (auto& p : task_prompts()) corpus.push_back(p);
    return data::build_vocab(corpus, 1);
  }();
  ModelConfig cfg = test::tiny_model(vocab.size(), 2);
  VlcModel<float> model{cfg, 3};
};

TEST(Nlvr, TwoForwardsPerPairAndOrderedHalves) {
  Rig r;
  Rng rng(1);
  MlpHead<float> head(32, 32, 2, rng);
  std::vector<PairSample> pairs = {{r.items[0].image, r.items[1].image, nlvr_statement(data::Color::kRed), false},
                                   {r.items[2].image, r.items[3].image, nlvr_statement(data::Color::kBlue), true}};
  auto out = nlvr_forward(r.model, head, std::span<const PairSample>(pairs), r.vocab);
  EXPECT_EQ(out.forwards, 4u);
  EXPECT_EQ(out.logits.shape(), (Shape{2, 2}));
  EXPECT_EQ(out.pooled.shape(), (Shape{2, 32}));

  // Swapping the images swaps the two halves of the pooled vector.
  for (auto& p : pairs) std::swap(p.image_a, p.image_b);
  auto swapped = nlvr_forward(r.model, head, std::span<const PairSample>(pairs), r.vocab);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t k = 0; k < 16; ++k) {
      EXPECT_EQ(out.pooled.data()[b * 32 + k], swapped.pooled.data()[b * 32 + 16 + k]);
      EXPECT_EQ(out.pooled.data()[b * 32 + 16 + k], swapped.pooled.data()[b * 32 + k]);
    }

  // Each half equals h_CLS of an ordinary forward of (image, statement), up to
  // float summation order in the batched kernels.
  MultimodalBatch single;
  append_sample(single, pairs[1].image_a, data::encode(pairs[1].caption, r.vocab, r.cfg.encoder.m_max), r.cfg.patch);
  auto cls = r.model.forward_full(single).h_cls;
  for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(swapped.pooled.data()[32 + k], cls.data()[k], 1e-5);
}

TEST(Nlvr, PairsAreBalancedAndLabelledFromSpecs) {
  Rig r;
  std::vector<data::SyntheticSpec> specs;
  for (const auto& s : r.samples) specs.push_back(s.spec);
  Rng rng(2);
  auto pairs = nlvr_pairs(r.items, specs, 40, rng);
  ASSERT_EQ(pairs.size(), 40u);
  std::size_t positive = 0;
  for (const auto& p : pairs) positive += p.label;
  EXPECT_EQ(positive, 20u);
  EXPECT_THROW(nlvr_pairs(std::vector<data::CaptionedImage>(1, r.items[0]), specs, 2, rng), std::invalid_argument);
}

TEST(Retrieval, HeadStartsAsTheItmPositiveLogit) {
  Rig r;
  auto head = retrieval_head_from_itm(r.model.itm_head);
  auto batch = make_batch(std::span<const data::CaptionedImage>(r.items), r.vocab, r.cfg.encoder.m_max, r.cfg.patch);
  auto scores = retrieval_scores(r.model, head, batch);
  auto logits = r.model.itm_head(r.model.forward_full(batch).h_cls);
  ASSERT_EQ(scores.numel(), batch.size);
  for (std::size_t b = 0; b < batch.size; ++b) EXPECT_NEAR(scores.data()[b], logits.data()[2 * b + 1], 1e-5);
}

TEST(Retrieval, UniformHeadGivesLogOfCandidateCount) {
  Rig r;
  auto head = retrieval_head_from_itm(r.model.itm_head);
  for (auto& w : head.weight.mutable_data()) w = 0;
  head.bias.mutable_data()[0] = 0.7f;
  std::vector<std::string> pool;
  for (const auto& it : r.items) pool.push_back(it.caption);
  pool.push_back("a shape");
  pool.push_back("nothing here");
  pool.push_back("red");
  pool.push_back("blue things");
  Rng rng(3);
  const auto negatives = sample_negatives(pool, r.items[0].caption, 15, rng);
  auto loss = retrieval_finetune_loss(r.model, head, r.items[0].image, r.items[0].caption, negatives, r.vocab);
  EXPECT_NEAR(loss.item(), std::log(16.0), 1e-5);
}

TEST(Retrieval, NegativeSampling) {
  Rng rng(4);
  const std::vector<std::string> pool = {"p", "a", "b", "c", "a", "p"};
  auto some = sample_negatives(pool, "p", 2, rng);
  ASSERT_EQ(some.size(), 2u);
  EXPECT_NE(some[0], some[1]);
  for (const auto& s : some) EXPECT_NE(s, "p");
  auto many = sample_negatives(pool, "p", 9, rng);  // fewer distinct than asked: repeats
  EXPECT_EQ(many.size(), 9u);
  for (const auto& s : many) EXPECT_NE(s, "p");
  EXPECT_THROW(sample_negatives({"p", "p"}, "p", 1, rng), std::invalid_argument);
}

TEST(Retrieval, RejectsDegenerateQueries) {
  Rig r;
  auto head = retrieval_head_from_itm(r.model.itm_head);
  EXPECT_THROW(retrieval_finetune_loss(r.model, head, r.items[0].image, "x", {}, r.vocab), std::invalid_argument);
  EXPECT_THROW(retrieval_finetune_loss(r.model, head, r.items[0].image, "x", {"x"}, r.vocab), std::invalid_argument);
}

TEST(Vqa, LossIsMeanBinaryNll) {
  BasicTensor<double> scores({2, 3}, std::vector<double>{0.5, -1.0, 2.0, 0.0, 3.0, -0.25}, true);
  const std::vector<double> targets = {1, 0, 0, 0.5, 1, 0};
  double expect = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-scores.data()[i]));
    expect -= targets[i] * std::log(p) + (1 - targets[i]) * std::log(1 - p);
  }
  expect /= 6;
  EXPECT_NEAR(vqa_loss(scores, targets).item(), expect, 1e-12);
}

TEST(Vqa, SamplesAskEveryQuestionAndHeadMustMatchTable) {
  Rig r;
  std::vector<data::SyntheticSpec> specs;
  for (const auto& s : r.samples) specs.push_back(s.spec);
  const auto table = synthetic_answer_table();
  EXPECT_EQ(table.size(), 12u);
  const auto samples = vqa_samples(specs, table);
  ASSERT_EQ(samples.size(), 3 * specs.size());
  EXPECT_EQ(table.answer(samples[0].answer), data::word(specs[0].color));
  EXPECT_EQ(table.answer(samples[1].answer), data::word(specs[0].shape));
  EXPECT_EQ(table.answer(samples[2].answer), data::word(specs[0].quadrant));

  Rng rng(5);
  MlpHead<float> head(16, 32, 5, rng);
  MultimodalBatch batch;
  append_sample(batch, r.items[0].image, data::encode("what shape is it", r.vocab, 6), 8);
  EXPECT_THROW(vqa_forward(r.model, head, batch, table), std::invalid_argument);
  MlpHead<float> good(16, 32, 12, rng);
  EXPECT_EQ(vqa_forward(r.model, good, batch, table).shape(), (Shape{1, 12}));
}

TEST(Vqa, AnswerTableFileRoundTrip) {
  test::TempDir dir("answers");
  const auto table = synthetic_answer_table();
  table.save((dir / "a.txt").string());
  const auto back = AnswerTable::load((dir / "a.txt").string());
  EXPECT_EQ(back.answers(), table.answers());
  EXPECT_EQ(back.id("blue"), 2u);
  EXPECT_THROW(back.id("purple"), std::out_of_range);
  EXPECT_THROW(AnswerTable::load((dir / "none.txt").string()), std::runtime_error);
}

TEST(Finetune, GradientsReachTheEncoderThroughEachHead) {
  Rig r;
  Rng rng(6);
  MlpHead<float> head(16, 32, 12, rng);
  MultimodalBatch batch;
  append_sample(batch, r.items[0].image, data::encode("what color is the shape", r.vocab, 6), 8);
  std::vector<float> targets(12, 0.0f);
  targets[0] = 1;
  backward(vqa_loss(vqa_forward(r.model, head, batch, synthetic_answer_table()), targets));
  for (const auto& p : finetune_backbone(r.model)) {
    if (p.name.find("token_embed.table") != std::string::npos) continue;  // only the rows in use move
    EXPECT_TRUE(p.tensor->has_grad()) << p.name;
  }
}

}  // namespace
}  // namespace vlc
