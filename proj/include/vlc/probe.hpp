#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vlc/data/image.hpp"
#include "vlc/model.hpp"

namespace vlc {

template <typename It1, typename It2>
double cosine(It1 a, It1 a_end, It2 b) {
  double dot = 0, na = 0, nb = 0;
  for (; a != a_end; ++a, ++b) {
    dot += static_cast<double>(*a) * static_cast<double>(*b);
    na += static_cast<double>(*a) * static_cast<double>(*a);
    nb += static_cast<double>(*b) * static_cast<double>(*b);
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// Cosine similarity of one word state against every patch state, on the patch grid.
struct AlignmentMap {
  std::string word;
  std::size_t position = 0;  // token position, CLS is 0
  bool unknown = false;      // word fell back to UNK
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> scores;  // row-major

  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }
};

// Final-layer states of a full unmasked forward of one (image, caption) pair.
template <typename T>
EncoderOutput<T> probe_forward(const VlcModel<T>& model, const data::Vocab& vocab, const data::Image& image,
                               const std::string& caption) {
  NoGradGuard ng;
  MultimodalBatch batch;
  append_sample(batch, image, data::encode(caption, vocab, model.cfg.encoder.m_max), model.cfg.patch);
  return model.forward_full(batch);
}

template <typename T>
AlignmentMap alignment_at(const VlcModel<T>& model, const EncoderOutput<T>& enc, std::size_t position) {
  const std::size_t d = model.cfg.encoder.width, n = enc.h_image.dim(1);
  AlignmentMap map;
  map.position = position;
  map.rows = map.cols = model.cfg.grid();
  map.scores.resize(n);
  auto text = enc.h_text.data();
  auto img = enc.h_image.data();
  auto w = text.begin() + static_cast<std::ptrdiff_t>(position * d);
  for (std::size_t j = 0; j < n; ++j) {
    map.scores[j] = static_cast<float>(cosine(w, w + static_cast<std::ptrdiff_t>(d), img.begin() + static_cast<std::ptrdiff_t>(j * d)));
  }
  return map;
}

// Word-to-patch alignment for the first occurrence of `word` in the caption.
template <typename T>
AlignmentMap word_patch_alignment(const VlcModel<T>& model, const data::Vocab& vocab, const data::Image& image,
                                  const std::string& caption, const std::string& word) {
  const auto words = data::split_words(caption);
  const auto it = std::find(words.begin(), words.end(), word);
  if (it == words.end()) throw std::invalid_argument("word '" + word + "' does not occur in caption '" + caption + "'");
  const std::size_t position = static_cast<std::size_t>(it - words.begin()) + 1;
  if (position >= model.cfg.encoder.m_max) {
    throw std::invalid_argument("word '" + word + "' lies beyond the text length " + std::to_string(model.cfg.encoder.m_max));
  }
  auto enc = probe_forward(model, vocab, image, caption);
  auto map = alignment_at(model, enc, position);
  map.word = word;
  map.unknown = !vocab.contains(word);
  return map;
}

// Quadrant (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right) of a patch index.
inline std::size_t patch_quadrant(std::size_t index, std::size_t rows, std::size_t cols) {
  const std::size_t r = index / cols, c = index % cols;
  return (r * 2 >= rows ? 2 : 0) + (c * 2 >= cols ? 1 : 0);
}

// Heatmap: grayscale image (min-max scaled, `scale` pixels per cell) plus a
// TSV sidecar with the raw scores.
inline void write_heatmap(const AlignmentMap& map, const std::filesystem::path& image_path, std::size_t scale = 8) {
  const auto [lo, hi] = std::minmax_element(map.scores.begin(), map.scores.end());
  const float span = *hi - *lo;
  data::Image img{map.rows * scale, map.cols * scale, 1, {}};
  img.pixels.resize(img.height * img.width);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const float v = map.scores[(y / scale) * map.cols + x / scale];
      img.pixels[y * img.width + x] = span > 0 ? (v - *lo) / span : 0.0f;
    }
  data::quantize(img);
  data::write_image(img, image_path);

  auto tsv = image_path;
  tsv.replace_extension(".tsv");
  std::ofstream out(tsv);
  if (!out) throw std::runtime_error("cannot write " + tsv.string());
  out << "# word=" << map.word << " position=" << map.position << " rows=" << map.rows << " cols=" << map.cols << '\n';
  out << "row\tcol\tcosine\n";
  char buf[64];
  for (std::size_t r = 0; r < map.rows; ++r)
    for (std::size_t c = 0; c < map.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(map.scores[r * map.cols + c]));
      out << r << '\t' << c << '\t' << buf << '\n';
    }
}

// Scores back from a heatmap sidecar.
inline AlignmentMap read_heatmap_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  AlignmentMap map;
  std::string line;
  std::getline(in, line);
  std::istringstream meta(line.substr(2));
  for (std::string kv; meta >> kv;) {
    const auto eq = kv.find('=');
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "word") map.word = v;
    if (k == "position") map.position = std::stoul(v);
    if (k == "rows") map.rows = std::stoul(v);
    if (k == "cols") map.cols = std::stoul(v);
  }
  std::getline(in, line);
  map.scores.assign(map.rows * map.cols, 0.0f);
  std::size_t r, c;
  std::string value;
  while (in >> r >> c >> value) map.scores.at(r * map.cols + c) = std::strtof(value.c_str(), nullptr);
  return map;
}

// Highest word-to-patch cosine of a single noun paired with an image.
struct NounSimilarity {
  std::string noun;
  std::string image_id;
  double max_similarity = 0;
  bool unknown = false;
};

template <typename T>
std::vector<NounSimilarity> noun_similarity(const VlcModel<T>& model, const data::Vocab& vocab,
                                            const std::vector<data::CaptionedImage>& items,
                                            const std::vector<std::string>& nouns) {
  std::vector<NounSimilarity> out;
  for (const auto& item : items)
    for (const auto& noun : nouns) {
      auto enc = probe_forward(model, vocab, item.image, noun);
      const auto map = alignment_at(model, enc, 1);
      out.push_back({noun, item.id, *std::max_element(map.scores.begin(), map.scores.end()), !vocab.contains(noun)});
    }
  return out;
}

struct Histogram {
  double lo = -1.0;
  double hi = 1.0;
  std::vector<std::size_t> counts;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};

inline Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo = -1.0, double hi = 1.0) {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram needs bins > 0 and hi > lo");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  for (double v : values) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((v - lo) / h.bin_width()));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

struct KMeansResult {
  std::vector<std::size_t> assignment;
  std::vector<double> centroids;        // [k, dim]
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
  bool converged = false;

  double inertia() const { return inertia_history.back(); }
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0;
  for (std::size_t i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace detail

// Lloyd iterations from a k-means++ start. points: [n, dim] row-major.
inline KMeansResult kmeans(const std::vector<double>& points, std::size_t dim, std::size_t k, Rng& rng,
                           std::size_t max_iter = 100) {
  if (dim == 0 || points.size() % dim != 0) throw std::invalid_argument("kmeans: points do not divide into rows of dim");
  const std::size_t n = points.size() / dim;
  if (k == 0 || k > n) {
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " with " + std::to_string(n) + " points");
  }
  const double* p = points.data();
  KMeansResult res;
  res.centroids.reserve(k * dim);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  res.centroids.insert(res.centroids.end(), p + first * dim, p + (first + 1) * dim);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    const double* last = res.centroids.data() + (c - 1) * dim;
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], detail::sq_dist(p + i * dim, last, dim));
      total += nearest[i];
    }
    std::size_t chosen = 0;
    if (total > 0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen + 1 < n; ++chosen) {
        r -= nearest[chosen];
        if (r < 0) break;
      }
    } else {
      chosen = pick(rng);
    }
    res.centroids.insert(res.centroids.end(), p + chosen * dim, p + (chosen + 1) * dim);
  }

  res.assignment.assign(n, 0);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    double inertia = 0;
    bool changed = res.iterations == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = detail::sq_dist(p + i * dim, res.centroids.data() + c * dim, dim);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      changed = changed || best != res.assignment[i];
      res.assignment[i] = best;
      inertia += best_d;
    }
    res.inertia_history.push_back(inertia);
    if (!changed) {
      res.converged = true;
      break;
    }
    std::vector<double> sum(k * dim, 0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[res.assignment[i]];
      for (std::size_t j = 0; j < dim; ++j) sum[res.assignment[i] * dim + j] += p[i * dim + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) res.centroids[c * dim + j] = sum[c * dim + j] / static_cast<double>(count[c]);
    }
  }
  return res;
}

// Final-layer patch states of image-only forwards, clustered jointly.
template <typename T>
KMeansResult cluster_patches(const VlcModel<T>& model, const std::vector<data::Image>& images, std::size_t k, Rng& rng,
                             std::size_t max_iter = 100) {
  NoGradGuard ng;
  MultimodalBatch batch;
  data::EncodedText empty{{data::kCls}, {1}};
  for (const auto& img : images) append_sample(batch, img, empty, model.cfg.patch);
  auto enc = model.encoder.encode_full(std::nullopt, {}, model.patch_embed(batch.patch_tensor<T>()));
  auto d = enc.h_image.data();
  return kmeans(std::vector<double>(d.begin(), d.end()), model.cfg.encoder.width, k, rng, max_iter);
}

// Cluster ids of one image's patch grid as a color map.
inline void write_cluster_map(const std::vector<std::size_t>& labels, std::size_t rows, std::size_t cols,
                              const std::filesystem::path& path, std::size_t scale = 8) {
  static constexpr std::array<std::array<float, 3>, 8> kPalette = {{{0.90f, 0.10f, 0.10f},
                                                                    {0.10f, 0.60f, 0.90f},
                                                                    {0.20f, 0.80f, 0.20f},
                                                                    {0.95f, 0.80f, 0.10f},
                                                                    {0.60f, 0.30f, 0.80f},
                                                                    {0.95f, 0.50f, 0.10f},
                                                                    {0.50f, 0.50f, 0.50f},
                                                                    {0.10f, 0.10f, 0.10f}}};
  if (labels.size() != rows * cols) throw std::invalid_argument("cluster map: label count does not match the grid");
  data::Image img{rows * scale, cols * scale, 3, {}};
  img.pixels.resize(img.height * img.width * 3);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const auto& color = kPalette[labels[(y / scale) * cols + x / scale] % kPalette.size()];
      for (std::size_t ch = 0; ch < 3; ++ch) img.pixels[(y * img.width + x) * 3 + ch] = color[ch];
    }
  data::quantize(img);
  data::write_image(img, path);
}

}  // namespace vlc
