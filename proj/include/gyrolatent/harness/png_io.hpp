#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gyrolatent/nn/tensor.hpp"

namespace gyrolatent::harness {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// Reads an 8-bit PNG as grayscale. Colour images are reduced to luminance
/// 0.299 R + 0.587 G + 0.114 B. Throws IngestError naming the file.
GrayImage read_png_gray(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG. Throws IoError.
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);
/// Writes an 8-bit RGB PNG from interleaved pixels. Throws IoError.
void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb);

/// [H, W] tensor in [0, 1] from 8-bit pixels (v / 255).
nn::Tensor to_tensor(const GrayImage& image);
/// Inverse of to_tensor with rounding; values are clamped to [0, 1] first.
GrayImage to_gray(const nn::Tensor& image);

}  // namespace gyrolatent::harness
