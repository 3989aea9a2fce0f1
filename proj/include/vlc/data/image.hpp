#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace vlc::data {

// Height x width x channels, row-major, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  float at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  bool operator==(const Image&) const = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

// Snaps every pixel onto the 8-bit grid so that file export is lossless.
inline void quantize(Image& img) {
  for (auto& v : img.pixels) v = static_cast<float>(to_byte(v)) / 255.0f;
}

inline std::vector<std::uint8_t> to_bytes(const Image& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), out.begin(), to_byte);
  return out;
}

inline Image from_bytes(std::size_t h, std::size_t w, std::size_t c, const std::uint8_t* bytes) {
  Image img(h, w, c);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
  return img;
}

// Binary PPM (P6) for 3 channels, PGM (P5) for 1.
inline void write_pnm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ImageError("pnm export needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  auto bytes = to_bytes(img);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw ImageError(path.string() + ": not a binary PPM/PGM");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    long v = -1;
    in >> v;
    if (!in || v <= 0) throw ImageError(path.string() + ": bad header");
    return static_cast<std::size_t>(v);
  };
  const std::size_t w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw ImageError(path.string() + ": only 8-bit images are supported");
  in.get();
  const std::size_t c = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> bytes(w * h * c);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!in) throw ImageError(path.string() + ": truncated pixel data");
  return from_bytes(h, w, c, bytes.data());
}

inline void write_png(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ImageError("png export needs 1 or 3 channels");
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  auto bytes = to_bytes(img);
  if (!png_image_write_to_file(&pi, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw ImageError("cannot write " + path.string() + ": " + pi.message);
  }
}

// Decodes any PNG to 8-bit RGB.
inline Image read_png(const std::filesystem::path& path) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str())) {
    throw ImageError("cannot read " + path.string() + ": " + pi.message);
  }
  pi.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw ImageError("cannot decode " + path.string() + ": " + pi.message);
  }
  return from_bytes(pi.height, pi.width, 3, bytes.data());
}

inline Image read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return read_pnm(path);
  throw ImageError(path.string() + ": unsupported image format (expected .png or .ppm)");
}

inline void write_image(const Image& img, const std::filesystem::path& path) {
  if (path.extension() == ".png")
    write_png(img, path);
  else
    write_pnm(img, path);
}

// Shorter edge scaled to the target, then a center crop; nearest-neighbour.
inline Image resize_crop(const Image& src, std::size_t height, std::size_t width, std::size_t channels) {
  if (src.height == height && src.width == width && src.channels == channels) return src;
  const double s = std::max(static_cast<double>(height) / static_cast<double>(src.height),
                            static_cast<double>(width) / static_cast<double>(src.width));
  const double scaled_h = static_cast<double>(src.height) * s;
  const double scaled_w = static_cast<double>(src.width) * s;
  const double off_y = (scaled_h - static_cast<double>(height)) / 2.0;
  const double off_x = (scaled_w - static_cast<double>(width)) / 2.0;
  Image out(height, width, channels);
  for (std::size_t y = 0; y < height; ++y) {
    const auto sy = std::min(src.height - 1, static_cast<std::size_t>((static_cast<double>(y) + 0.5 + off_y) / s));
    for (std::size_t x = 0; x < width; ++x) {
      const auto sx = std::min(src.width - 1, static_cast<std::size_t>((static_cast<double>(x) + 0.5 + off_x) / s));
      for (std::size_t c = 0; c < channels; ++c) out.at(y, x, c) = src.at(sy, sx, std::min(c, src.channels - 1));
    }
  }
  return out;
}

}  // namespace vlc::data
