#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vlc/data/image.hpp"

namespace vlc::data {

struct CaptionedImage {
  std::string id;
  Image image;
  std::string caption;
};

struct LoadError {
  std::size_t line = 0;  // 1-based manifest line
  std::string id;        // empty when the line could not be parsed
  std::string message;
};

inline constexpr const char* kDataRootEnv = "VLC_DATA_ROOT";

// Image root used when none is configured explicitly.
inline std::filesystem::path default_data_root() {
  const char* env = std::getenv(kDataRootEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

// Streams a JSONL manifest whose lines are {"id", "image", "caption"}. Every
// record is either an image (resized to the configured resolution) or an error.
class JsonlReader {
 public:
  using Record = std::variant<CaptionedImage, LoadError>;

  JsonlReader(const std::filesystem::path& manifest, std::filesystem::path image_root, std::size_t height,
              std::size_t width, std::size_t channels = 3)
      : in_(manifest), root_(std::move(image_root)), height_(height), width_(width), channels_(channels) {
    if (!in_) throw std::runtime_error("cannot open manifest " + manifest.string());
  }

  std::optional<Record> next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return parse(line);
    }
    return std::nullopt;
  }

 private:
  Record parse(const std::string& line) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      return LoadError{line_no_, "", std::string("parse error: ") + e.what()};
    }
    if (!obj.is_object() || obj.size() != 3) {
      return LoadError{line_no_, "", "expected an object with keys id, image, caption"};
    }
    for (const char* key : {"id", "image", "caption"}) {
      if (!obj.contains(key) || !obj[key].is_string()) {
        return LoadError{line_no_, "", std::string("missing or non-string key '") + key + "'"};
      }
    }
    CaptionedImage item;
    item.id = obj["id"].get<std::string>();
    item.caption = obj["caption"].get<std::string>();
    const std::filesystem::path path = root_ / obj["image"].get<std::string>();
    if (!std::filesystem::exists(path)) return LoadError{line_no_, item.id, "image not found: " + path.string()};
    try {
      item.image = resize_crop(read_image(path), height_, width_, channels_);
    } catch (const ImageError& e) {
      return LoadError{line_no_, item.id, e.what()};
    }
    return item;
  }

  std::ifstream in_;
  std::filesystem::path root_;
  std::size_t height_, width_, channels_;
  std::size_t line_no_ = 0;
};

struct LoadedDataset {
  std::vector<CaptionedImage> items;
  std::vector<LoadError> errors;
};

inline LoadedDataset load_jsonl(const std::filesystem::path& manifest, const std::filesystem::path& image_root,
                                std::size_t height, std::size_t width, std::size_t channels = 3) {
  JsonlReader reader(manifest, image_root, height, width, channels);
  LoadedDataset out;
  while (auto rec = reader.next()) {
    if (auto* item = std::get_if<CaptionedImage>(&*rec))
      out.items.push_back(std::move(*item));
    else
      out.errors.push_back(std::get<LoadError>(*rec));
  }
  return out;
}

// Writes images as <id>.ppm (or .png) under `dir` plus a manifest.jsonl.
inline std::filesystem::path export_jsonl(const std::vector<CaptionedImage>& items, const std::filesystem::path& dir,
                                          const std::string& extension = ".ppm") {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "manifest.jsonl";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  for (const auto& item : items) {
    const std::string file = item.id + extension;
    write_image(item.image, dir / file);
    nlohmann::ordered_json line;
    line["id"] = item.id;
    line["image"] = file;
    line["caption"] = item.caption;
    out << line.dump() << '\n';
  }
  return manifest;
}

}  // namespace vlc::data
