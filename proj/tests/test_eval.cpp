#include <fstream>

#include "support.hpp"

namespace vlc {
namespace {

// Brute-force recall: count candidates that strictly outrank the truth, plus
// ties with a lower index.
double brute_recall(const ScoreMatrix& s, const std::vector<std::size_t>& truth, std::size_t k) {
  std::size_t hit = 0;
  for (std::size_t q = 0; q < s.rows; ++q) {
    std::size_t ahead = 0;
    for (std::size_t c = 0; c < s.cols; ++c) {
      const double v = s.at(q, c), t = s.at(q, truth[q]);
      ahead += v > t || (v == t && c < truth[q]);
    }
    hit += ahead < k;
  }
  return static_cast<double>(hit) / static_cast<double>(s.rows);
}

TEST(Recall, TruthAlwaysOnTopGivesOne) {
  ScoreMatrix s{5, 5, std::vector<double>(25, 0.0)};
  for (std::size_t i = 0; i < 5; ++i) s.values[i * 5 + i] = 1.0;
  std::vector<std::size_t> truth = {0, 1, 2, 3, 4};
  auto r = recall_at_k(s, truth, {1, 5});
  EXPECT_EQ(r.at(1), 1.0);
  EXPECT_EQ(r.at(5), 1.0);
}

TEST(Recall, MatchesBruteForceOnRandomScores) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coarse(0, 4);  // plenty of ties
  std::uniform_int_distribution<std::size_t> pick(0, 9);
  for (int rep = 0; rep < 50; ++rep) {
    ScoreMatrix s{10, 10, std::vector<double>(100)};
    for (auto& v : s.values) v = coarse(rng);
    std::vector<std::size_t> truth(10);
    for (auto& t : truth) t = pick(rng);
    auto r = recall_at_k(s, truth, {1, 3, 5, 10});
    for (std::size_t k : {1u, 3u, 5u, 10u}) EXPECT_DOUBLE_EQ(r.at(k), brute_recall(s, truth, k));
    EXPECT_EQ(r.at(10), 1.0);
  }
}

TEST(Recall, RandomScoresGiveChanceLevel) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 100, trials = 10000;
  ScoreMatrix s{trials, n, std::vector<double>(trials * n)};
  for (auto& v : s.values) v = u(rng);
  std::vector<std::size_t> truth(trials);
  for (std::size_t i = 0; i < trials; ++i) truth[i] = i % n;
  auto r = recall_at_k(s, truth, {1, 10});
  const double sigma1 = std::sqrt(0.01 * 0.99 / trials), sigma10 = std::sqrt(0.1 * 0.9 / trials);
  EXPECT_NEAR(r.at(1), 0.01, 3 * sigma1);
  EXPECT_NEAR(r.at(10), 0.10, 3 * sigma10);
}

TEST(Recall, TiesFavourTheLowerIndexAndBadTruthThrows) {
  const std::vector<double> row = {0.5, 0.5, 0.5};
  EXPECT_EQ(rank_of(row, 0), 0u);
  EXPECT_EQ(rank_of(row, 2), 2u);
  EXPECT_THROW(rank_of(row, 3), std::out_of_range);
  ScoreMatrix s{1, 3, row};
  EXPECT_THROW(recall_at_k(s, {0, 1}, {1}), std::invalid_argument);
  auto t = ScoreMatrix{2, 3, {1, 2, 3, 4, 5, 6}}.transposed();
  EXPECT_EQ(t.rows, 3u);
  EXPECT_EQ(t.at(2, 1), 6.0);
}

TEST(Accuracy, CountsAgreement) {
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 0, 1, 1}, std::vector<int>{1, 1, 1, 0}), 0.5);
  EXPECT_THROW(accuracy(std::vector<int>{1}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  const std::vector<float> logits = {0.1f, 0.9f, 0.3f, 0.8f, 0.2f, 0.0f};
  EXPECT_EQ(argmax_rows(logits, 3), (std::vector<std::size_t>{1, 0}));
}

// Plain Lloyd iterations from given centroids, written out long-hand.
std::vector<std::size_t> lloyd(const std::vector<double>& pts, std::vector<double> cent, std::size_t k, int iters) {
  const std::size_t n = pts.size() / 2;
  std::vector<std::size_t> a(n);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = 1e300;
      for (std::size_t c = 0; c < k; ++c) {
        const double dx = pts[2 * i] - cent[2 * c], dy = pts[2 * i + 1] - cent[2 * c + 1];
        if (dx * dx + dy * dy < best) {
          best = dx * dx + dy * dy;
          a[i] = c;
        }
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      double sx = 0, sy = 0, cnt = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (a[i] == c) sx += pts[2 * i], sy += pts[2 * i + 1], ++cnt;
      if (cnt > 0) cent[2 * c] = sx / cnt, cent[2 * c + 1] = sy / cnt;
    }
  }
  return a;
}

TEST(KMeans, AgreesWithLloydOracleAndInertiaNeverRises) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<double> pts;
  const double centers[4][2] = {{0, 0}, {5, 0}, {0, 5}, {5, 5}};
  for (int i = 0; i < 16; ++i) {
    pts.push_back(centers[i % 4][0] + noise(gen));
    pts.push_back(centers[i % 4][1] + noise(gen));
  }
  Rng rng(4);
  auto res = kmeans(pts, 2, 4, rng);
  EXPECT_TRUE(res.converged);
  for (std::size_t i = 1; i < res.inertia_history.size(); ++i)
    EXPECT_LE(res.inertia_history[i], res.inertia_history[i - 1] + 1e-12);

  // Same partition as the oracle started from the final centroids.
  auto oracle = lloyd(pts, res.centroids, 4, 5);
  EXPECT_EQ(oracle, res.assignment);
  // Well-separated blobs: points of one blob share a label.
  for (int i = 4; i < 16; ++i) EXPECT_EQ(res.assignment[i], res.assignment[i % 4]);

  double inertia = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    const auto c = res.assignment[i];
    inertia += std::pow(pts[2 * i] - res.centroids[2 * c], 2) + std::pow(pts[2 * i + 1] - res.centroids[2 * c + 1], 2);
  }
  EXPECT_NEAR(res.inertia(), inertia, 1e-9);
}

TEST(KMeans, EdgeCases) {
  const std::vector<double> pts = {0, 0, 1, 1, 4, 4};
  Rng rng(5);
  auto one = kmeans(pts, 2, 1, rng);
  EXPECT_NEAR(one.centroids[0], 5.0 / 3.0, 1e-12);
  auto all = kmeans(pts, 2, 3, rng);
  EXPECT_EQ(all.inertia(), 0.0);
  std::vector<std::size_t> sorted = all.assignment;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(kmeans(pts, 2, 4, rng), std::invalid_argument);
  EXPECT_THROW(kmeans(pts, 2, 0, rng), std::invalid_argument);
  EXPECT_THROW(kmeans({0, 1, 2}, 2, 1, rng), std::invalid_argument);
}

TEST(Probe, CosineAndHistogram) {
  const std::vector<double> a = {1, 2, 3}, b = {-2, 1, 0}, z = {0, 0, 0};
  EXPECT_NEAR(cosine(a.begin(), a.end(), a.begin()), 1.0, 1e-15);
  EXPECT_EQ(cosine(a.begin(), a.end(), b.begin()), 0.0);
  EXPECT_EQ(cosine(a.begin(), a.end(), z.begin()), 0.0);

  auto h = histogram({-1.0, -0.95, 0.0, 0.5, 1.0, 7.0}, 4);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{2, 0, 1, 3}));
  EXPECT_THROW(histogram({}, 0), std::invalid_argument);
  EXPECT_THROW(histogram({}, 2, 1.0, 1.0), std::invalid_argument);
}

TEST(Probe, QuadrantOfPatchIndex) {
  EXPECT_EQ(patch_quadrant(0, 4, 4), 0u);
  EXPECT_EQ(patch_quadrant(3, 4, 4), 1u);
  EXPECT_EQ(patch_quadrant(9, 4, 4), 2u);
  EXPECT_EQ(patch_quadrant(15, 4, 4), 3u);
  EXPECT_EQ(patch_quadrant(1, 2, 2), 1u);
}

TEST(Probe, OrthogonalStatesGiveAZeroMap) {
  auto cfg = test::tiny_model(10, 1);
  VlcModel<double> model(cfg, 2);
  EncoderOutput<double> enc;
  std::vector<double> text(1 * 6 * 16, 0.0), img(1 * 4 * 16, 0.0);
  text[2 * 16 + 0] = 1.0;  // word at position 2 points along axis 0
  for (std::size_t j = 0; j < 4; ++j) img[j * 16 + 1 + j] = 2.0;
  enc.h_text = BasicTensor<double>({1, 6, 16}, text);
  enc.h_image = BasicTensor<double>({1, 4, 16}, img);
  auto map = alignment_at(model, enc, 2);
  EXPECT_EQ(map.scores, std::vector<float>(4, 0.0f));
  img[3 * 16 + 0] = 1.0;
  enc.h_image = BasicTensor<double>({1, 4, 16}, img);
  map = alignment_at(model, enc, 2);
  EXPECT_EQ(map.argmax(), 3u);
  EXPECT_NEAR(map.scores[3], 1.0 / std::sqrt(5.0), 1e-6);
}

TEST(Probe, HeatmapSidecarRoundTripsExactly) {
  test::TempDir dir("heat");
  AlignmentMap map;
  map.word = "red";
  map.position = 2;
  map.rows = map.cols = 4;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int i = 0; i < 16; ++i) map.scores.push_back(u(rng));
  write_heatmap(map, dir / "h.png");
  EXPECT_TRUE(std::filesystem::exists(dir / "h.png"));
  auto img = data::read_image(dir / "h.png");
  EXPECT_EQ(img.height, 32u);
  auto back = read_heatmap_tsv(dir / "h.tsv");
  EXPECT_EQ(back.word, "red");
  EXPECT_EQ(back.position, 2u);
  EXPECT_EQ(back.scores, map.scores);  // %.9g is exact for float
}

TEST(Probe, NounSimilarityCoversEveryPairAndFlagsUnknowns) {
  auto cfg = test::tiny_model(10, 1);
  VlcModel<float> model(cfg, 2);
  auto vocab = data::Vocab::from_words({"a", "circle", "square", "red", "in", "the"});
  auto items = data::items_of(data::generate_synthetic(3, 1, {16, 3, 0.1f}));
  auto sims = noun_similarity(model, vocab, items, {"circle", "circle", "zebra"});
  ASSERT_EQ(sims.size(), 9u);
  for (const auto& s : sims) {
    EXPECT_LE(s.max_similarity, 1.0 + 1e-6);
    EXPECT_EQ(s.unknown, s.noun == "zebra");
  }
  EXPECT_EQ(sims[0].max_similarity, sims[1].max_similarity);  // duplicates agree
  EXPECT_TRUE(noun_similarity(model, vocab, {}, {"circle"}).empty());
}

TEST(Probe, WordMustOccurWithinTheTextWindow) {
  auto cfg = test::tiny_model(10, 1);
  VlcModel<float> model(cfg, 2);
  auto vocab = data::Vocab::from_words({"a", "red", "square", "in", "the", "top"});
  const auto item = data::items_of(data::generate_synthetic(1, 1, {16, 3, 0.1f}))[0];
  const std::string caption = "a red square in the top left";
  auto map = word_patch_alignment(model, vocab, item.image, caption, "red");
  EXPECT_EQ(map.position, 2u);
  EXPECT_EQ(map.scores.size(), 4u);
  EXPECT_THROW(word_patch_alignment(model, vocab, item.image, caption, "blue"), std::invalid_argument);
  EXPECT_THROW(word_patch_alignment(model, vocab, item.image, caption, "left"), std::invalid_argument);
}

TEST(ItmEval, UntrainedModelSitsNearChance) {
  auto items = data::items_of(data::generate_synthetic(64, 9, {16, 3, 0.1f}));
  std::vector<std::string> corpus;
  for (const auto& it : items) corpus.push_back(it.caption);
  auto vocab = data::build_vocab(corpus, 1);
  auto cfg = test::tiny_model(vocab.size(), 1);
  VlcModel<float> model(cfg, 4);
  auto batch = make_batch(std::span<const data::CaptionedImage>(items), vocab, 6, 8);
  // Untrained, the head barely separates pairs: roughly half right.
  const double acc = itm_accuracy(model, batch);
  EXPECT_GE(acc, 0.3);
  EXPECT_LE(acc, 0.7);
  auto set = balanced_itm_set(4, 4);
  EXPECT_EQ(set.image_of, (std::vector<std::size_t>{0, 1, 2, 3, 1, 2, 3, 0}));
  EXPECT_THROW(balanced_itm_set(1), std::invalid_argument);
}

TEST(MimEval, BaselineIsPerImageMeanPrediction) {
  auto cfg = test::tiny_model(10, 1);
  VlcModel<double> model(cfg, 5);
  std::mt19937_64 rng(7);
  auto batch = test::random_batch(2, cfg, rng);
  std::vector<MaskPlan> plans(2);
  plans[0].image_kept = {0, 1};
  plans[0].image_masked = {2, 3};
  plans[1].image_kept = {1, 3};
  plans[1].image_masked = {0, 2};
  auto res = mim_heldout(model, batch, plans);
  double base = 0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    double mean = 0;
    for (std::size_t j = 0; j < 4; ++j)
      for (float v : batch.patch(b, j)) mean += v;
    mean /= 4.0 * static_cast<double>(batch.patch_dim);
    for (std::size_t j : plans[b].image_masked)
      for (float v : batch.patch(b, j)) base += (mean - v) * (mean - v), ++count;
  }
  EXPECT_NEAR(res.baseline, base / static_cast<double>(count), 1e-12);
  EXPECT_GT(res.mse, 0.0);
}

}  // namespace
}  // namespace vlc
