#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vlc/data/dataset.hpp"
#include "vlc/data/image.hpp"

namespace vlc::data {

enum class ShapeKind : std::uint8_t { kSquare, kCircle, kTriangle, kCross };
enum class Color : std::uint8_t { kRed, kGreen, kBlue, kYellow };
enum class Quadrant : std::uint8_t { kTopLeft, kTopRight, kBottomLeft, kBottomRight };

inline constexpr std::array<const char*, 4> kShapeWords = {"square", "circle", "triangle", "cross"};
inline constexpr std::array<const char*, 4> kColorWords = {"red", "green", "blue", "yellow"};
inline constexpr std::array<const char*, 4> kQuadrantWords = {"top left", "top right", "bottom left",
                                                              "bottom right"};
inline constexpr std::array<std::array<float, 3>, 4> kColorRgb = {{
    {1.0f, 0.0f, 0.0f},
    {0.0f, 1.0f, 0.0f},
    {0.0f, 0.0f, 1.0f},
    {1.0f, 1.0f, 0.0f},
}};

inline const char* word(ShapeKind s) { return kShapeWords[static_cast<std::size_t>(s)]; }
inline const char* word(Color c) { return kColorWords[static_cast<std::size_t>(c)]; }
inline const char* word(Quadrant q) { return kQuadrantWords[static_cast<std::size_t>(q)]; }

// One placed shape. The seed drives size, jitter and background noise.
struct SyntheticSpec {
  ShapeKind shape = ShapeKind::kSquare;
  Color color = Color::kRed;
  Quadrant quadrant = Quadrant::kTopLeft;
  std::uint64_t seed = 0;

  // Index in [0, 64) enumerating every (color, shape, quadrant) combination.
  std::size_t combo() const {
    return (static_cast<std::size_t>(color) * 4 + static_cast<std::size_t>(shape)) * 4 +
           static_cast<std::size_t>(quadrant);
  }
  bool operator==(const SyntheticSpec&) const = default;
};

struct SyntheticConfig {
  std::size_t size = 32;
  std::size_t channels = 3;
  float background_noise = 0.1f;
};

inline std::string synthetic_caption(const SyntheticSpec& s) {
  return std::string("a ") + word(s.color) + " " + word(s.shape) + " in the " + word(s.quadrant);
}

inline bool shape_covers(ShapeKind shape, double dx, double dy, double r) {
  switch (shape) {
    case ShapeKind::kSquare:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::kCircle:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::kTriangle:  // apex up
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2.0;
    case ShapeKind::kCross:
      return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) || (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
  }
  return false;
}

// Renders a single shape inside its quadrant on a dim noisy background. Values
// are snapped to the 8-bit grid.
inline Image render_synthetic(const SyntheticSpec& spec, const SyntheticConfig& cfg = {}) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image img(cfg.size, cfg.size, cfg.channels);
  for (auto& v : img.pixels) v = static_cast<float>(unit(rng)) * cfg.background_noise;

  const double half = static_cast<double>(cfg.size) / 2.0;
  const double r = half * (0.25 + 0.12 * unit(rng));
  const double slack = half / 2.0 - r;
  const auto q = static_cast<std::size_t>(spec.quadrant);
  const double cy = static_cast<double>(q / 2) * half + half / 2.0 + (unit(rng) * 2.0 - 1.0) * slack;
  const double cx = static_cast<double>(q % 2) * half + half / 2.0 + (unit(rng) * 2.0 - 1.0) * slack;
  const float intensity = 0.8f + 0.2f * static_cast<float>(unit(rng));
  const auto& rgb = kColorRgb[static_cast<std::size_t>(spec.color)];
  for (std::size_t y = 0; y < cfg.size; ++y)
    for (std::size_t x = 0; x < cfg.size; ++x) {
      if (!shape_covers(spec.shape, static_cast<double>(x) + 0.5 - cx, static_cast<double>(y) + 0.5 - cy, r)) continue;
      for (std::size_t c = 0; c < cfg.channels; ++c) img.at(y, x, c) = rgb[c % 3] * intensity;
    }
  quantize(img);
  return img;
}

struct SyntheticSample {
  CaptionedImage item;
  SyntheticSpec spec;
};

inline SyntheticSample make_synthetic(const SyntheticSpec& spec, const SyntheticConfig& cfg, std::size_t index) {
  return {{"syn-" + std::to_string(index), render_synthetic(spec, cfg), synthetic_caption(spec)}, spec};
}

// n samples with uniformly drawn shape, color and quadrant.
inline std::vector<SyntheticSample> generate_synthetic(std::size_t n, std::uint64_t seed,
                                                       const SyntheticConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<SyntheticSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticSpec spec;
    spec.shape = static_cast<ShapeKind>(pick(rng));
    spec.color = static_cast<Color>(pick(rng));
    spec.quadrant = static_cast<Quadrant>(pick(rng));
    spec.seed = rng();
    out.push_back(make_synthetic(spec, cfg, i));
  }
  return out;
}

// Every one of the 64 combinations once, in a seed-dependent order.
inline std::vector<SyntheticSample> generate_all_combinations(std::uint64_t seed, const SyntheticConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(64);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<SyntheticSample> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    SyntheticSpec spec;
    spec.color = static_cast<Color>(order[i] / 16);
    spec.shape = static_cast<ShapeKind>((order[i] / 4) % 4);
    spec.quadrant = static_cast<Quadrant>(order[i] % 4);
    spec.seed = rng();
    out.push_back(make_synthetic(spec, cfg, i));
  }
  return out;
}

inline std::vector<CaptionedImage> items_of(const std::vector<SyntheticSample>& samples) {
  std::vector<CaptionedImage> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.item);
  return out;
}

// Every word the generator can emit.
inline std::vector<std::string> synthetic_lexicon() {
  std::vector<std::string> captions;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t q = 0; q < 4; ++q)
        captions.push_back(synthetic_caption({static_cast<ShapeKind>(s), static_cast<Color>(c), static_cast<Quadrant>(q), 0}));
  return captions;
}

}  // namespace vlc::data
