#include "kvlp/data/image.hpp"

#include "kvlp/util/binary_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace kvlp::data {

Image blank_image(int height, int width, int channels) {
  Image img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(height * width * channels), 0.0);
  return img;
}

void quantize_8bit(Image& img) {
  for (auto& p : img.pixels) p = std::round(std::clamp(p, 0.0, 1.0) * 255.0) / 255.0;
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1) throw std::invalid_argument("PGM output requires a single channel");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::string bytes(img.pixels.size(), '\0');
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    bytes[i] = static_cast<char>(static_cast<unsigned char>(
        std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error(path.string() + ": not a binary PGM");
  auto next_int = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    int v = 0;
    in >> v;
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw std::runtime_error(path.string() + ": unsupported PGM header");
  }
  in.get();
  Image img = blank_image(h, w, 1);
  std::string bytes(img.pixels.size(), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::runtime_error(path.string() + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<unsigned char>(bytes[i]) / static_cast<double>(maxval);
  }
  return img;
}

void write_raw_f32(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_f32_le(out, img.pixels);
  nlohmann::json m = {{"height", img.height}, {"width", img.width}, {"channels", img.channels}};
  std::ofstream(path.string() + ".json") << m.dump() << '\n';
}

Image read_raw_f32(const std::filesystem::path& path) {
  std::ifstream mf(path.string() + ".json");
  if (!mf) throw std::runtime_error("missing manifest for " + path.string());
  auto m = nlohmann::json::parse(mf);
  Image img = blank_image(m.at("height").get<int>(), m.at("width").get<int>(),
                          m.at("channels").get<int>());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  img.pixels = read_f32_le(in, img.pixels.size());
  for (auto& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
  return img;
}

Image read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".bin") return read_raw_f32(path);
  throw std::runtime_error("unsupported image format: " + path.string());
}

Image resize_nearest(const Image& img, int height, int width) {
  if (img.height == height && img.width == width) return img;
  Image out = blank_image(height, width, img.channels);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height - 1, y * img.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width - 1, x * img.width / width);
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

ad::Matrix to_patches(const Image& img, int patch) {
  if (patch <= 0 || img.height % patch != 0 || img.width % patch != 0) {
    throw ad::DimensionError("image " + std::to_string(img.height) + "x" +
                             std::to_string(img.width) + " not divisible by patch size " +
                             std::to_string(patch));
  }
  const int gh = img.height / patch, gw = img.width / patch;
  ad::Matrix out(gh * gw, patch * patch * img.channels);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      const int row = gy * gw + gx;
      int col = 0;
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          for (int c = 0; c < img.channels; ++c) {
            out(row, col++) = img.at(gy * patch + y, gx * patch + x, c);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace kvlp::data
