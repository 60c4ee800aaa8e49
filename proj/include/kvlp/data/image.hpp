#pragma once

#include "kvlp/autodiff/tensor.hpp"

#include <filesystem>
#include <vector>

namespace kvlp::data {

// Pixel grid normalized to [0,1], row-major with interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;

  double& at(int y, int x, int c = 0) {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  double at(int y, int x, int c = 0) const {
    return pixels[static_cast<std::size_t>((y * width + x) * channels + c)];
  }
  bool operator==(const Image&) const = default;
};

Image blank_image(int height, int width, int channels = 1);

// Rounds every pixel to the nearest 8-bit level (what a PGM round trip keeps).
void quantize_8bit(Image& img);

// Binary 8-bit PGM (P5), single channel.
void write_pgm(const Image& img, const std::filesystem::path& path);
Image read_pgm(const std::filesystem::path& path);

// Raw little-endian f32 pixels; shape lives in a sibling "<path>.json" manifest.
void write_raw_f32(const Image& img, const std::filesystem::path& path);
Image read_raw_f32(const std::filesystem::path& path);

// Dispatches on extension: .pgm or .bin.
Image read_image(const std::filesystem::path& path);

// Nearest-neighbour resize hook for inputs whose size differs from the encoder's.
Image resize_nearest(const Image& img, int height, int width);

// Non-overlapping P×P patches in row-major grid order; each row is one
// flattened patch (row, column, channel order). Shape N_v × (P²·C).
ad::Matrix to_patches(const Image& img, int patch);

}  // namespace kvlp::data
