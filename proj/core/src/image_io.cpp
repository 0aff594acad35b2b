#include "veil/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace veil {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& why) {
  throw std::runtime_error("png: " + path + ": " + why);
}

}  // namespace

Tensor load_image(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(path, "cannot open for reading");

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    fail(path, "not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  // libpng reports errors through longjmp back to here.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "decode error");
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (bit_depth != 8) {
    auto depth = std::to_string(bit_depth);
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "expected 8-bit channels, got " + depth + "-bit");
  }
  if (color_type != PNG_COLOR_TYPE_RGB && color_type != PNG_COLOR_TYPE_RGB_ALPHA) {
    auto ct = std::to_string(color_type);
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "expected RGB or RGBA color type, got type " + ct);
  }
  if (color_type == PNG_COLOR_TYPE_RGB_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<png_byte> pixels(static_cast<size_t>(w) * h * 3);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor img = Tensor::zeros({3, static_cast<int64_t>(h), static_cast<int64_t>(w)});
  for (png_uint_32 y = 0; y < h; ++y) {
    for (png_uint_32 x = 0; x < w; ++x) {
      const png_byte* px = pixels.data() + (static_cast<size_t>(y) * w + x) * 3;
      for (int64_t c = 0; c < 3; ++c) {
        img.at(c, static_cast<int64_t>(y), static_cast<int64_t>(x)) = px[c] / 255.0;
      }
    }
  }
  return img;
}

Tensor load_image(const std::string& path, int64_t expect_h, int64_t expect_w) {
  Tensor img = load_image(path);
  if (img.dim(1) != expect_h || img.dim(2) != expect_w) {
    fail(path, "expected " + std::to_string(expect_h) + "x" + std::to_string(expect_w) +
                   " pixels, got " + std::to_string(img.dim(1)) + "x" +
                   std::to_string(img.dim(2)));
  }
  return img;
}

void save_image(const std::string& path, const Tensor& img) {
  if (img.rank() != 3 || img.dim(0) != 3) {
    throw std::invalid_argument("save_image: expected [3,H,W] tensor, got " +
                                shape_str(img.shape));
  }
  const int64_t h = img.dim(1);
  const int64_t w = img.dim(2);

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(path, "cannot open for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "encode error");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> row(static_cast<size_t>(w) * 3);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t c = 0; c < 3; ++c) {
        double v = img.at(c, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        row[static_cast<size_t>(x * 3 + c)] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace veil
