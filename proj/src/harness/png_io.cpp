#include "gyrolatent/harness/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gyrolatent/errors.hpp"

namespace gyrolatent::harness {

GrayImage read_png_gray(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw IngestError("cannot read PNG " + path.string() + ": " + img.message);
  }
  GrayImage out;
  out.width = img.width;
  out.height = img.height;
  const bool colour = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IngestError("cannot decode PNG " + path.string() + ": " + msg);
  }
  if (!colour) {
    out.pixels = std::move(buf);
    return out;
  }
  out.pixels.resize(out.width * out.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double y = 0.299 * buf[3 * i] + 0.587 * buf[3 * i + 1] + 0.114 * buf[3 * i + 2];
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return out;
}

namespace {
void write_png(const std::filesystem::path& path, std::size_t w, std::size_t h, std::uint32_t format,
               const std::uint8_t* data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, data, 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}
}  // namespace

void write_png_gray(const std::filesystem::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) throw ShapeError("write_png_gray: pixel count mismatch");
  write_png(path, image.width, image.height, PNG_FORMAT_GRAY, image.pixels.data());
}

void write_png_rgb(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != 3 * width * height) throw ShapeError("write_png_rgb: pixel count mismatch");
  write_png(path, width, height, PNG_FORMAT_RGB, rgb.data());
}

nn::Tensor to_tensor(const GrayImage& image) {
  nn::Tensor t({image.height, image.width});
  for (std::size_t i = 0; i < image.pixels.size(); ++i) t[i] = image.pixels[i] / 255.0;
  return t;
}

GrayImage to_gray(const nn::Tensor& image) {
  if (image.rank() != 2) throw ShapeError("to_gray: expected an [H, W] tensor, got " + nn::shape_string(image.shape()));
  GrayImage g;
  g.height = image.dim(0);
  g.width = image.dim(1);
  g.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = std::isfinite(image[i]) ? std::clamp(image[i], 0.0, 1.0) : 0.0;
    g.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  return g;
}

}  // namespace gyrolatent::harness
