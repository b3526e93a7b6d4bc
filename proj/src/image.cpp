// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/image.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>

#include <fmt/format.h>
#include <jpeglib.h>
#include <png.h>

#include "medzs/error.hpp"

namespace medzs {

namespace {

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::memcmp(b.data(), kSig, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

RgbImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kDecode, fmt::format("PNG decode failed: {}", img.message));
  }
  // Read with alpha when present and drop it afterwards; asking libpng for
  // RGB directly would composite against a background instead.
  const bool has_alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
  img.format = has_alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
  const int channels = has_alpha ? 4 : 3;
  if (img.width == 0 || img.height == 0) {
    png_image_free(&img);
    throw Error(ErrorCode::kDecode, "PNG image has zero area");
  }
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorCode::kDecode, fmt::format("PNG decode failed: {}", msg));
  }
  RgbImage out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  if (!has_alpha) {
    out.pixels = std::move(buf);
    return out;
  }
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (std::size_t i = 0, n = static_cast<std::size_t>(out.width) * out.height; i < n; ++i) {
    std::memcpy(&out.pixels[i * 3], &buf[i * channels], 3);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  jerr.message[0] = '\0';
  RgbImage out;
  // No objects with non-trivial destructors may be created between setjmp
  // and the last libjpeg call; `out` is declared above.
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::kDecode, fmt::format("JPEG decode failed: {}", jerr.message));
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorCode::kDecode, "CMYK JPEG images are not supported");
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = static_cast<int>(cinfo.output_width);
  out.height = static_cast<int>(cinfo.output_height);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (out.width == 0 || out.height == 0) throw Error(ErrorCode::kDecode, "JPEG image has zero area");
  return out;
}

// --- Pillow-compatible resampling -------------------------------------------

constexpr int kPrecisionBits = 32 - 8 - 2;

double bicubic_filter(double x) {
  constexpr double a = -0.5;
  if (x < 0.0) x = -x;
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1;
  if (x < 2.0) return (((x - 5) * x + 8) * x - 4) * a;
  return 0.0;
}

struct Coefficients {
  int ksize = 0;
  std::vector<int> bounds;        // (min, count) per output pixel
  std::vector<std::int32_t> kk;   // fixed-point weights, ksize per output pixel
};

Coefficients precompute_coeffs(int in_size, double in0, double in1, int out_size) {
  constexpr double kSupport = 2.0;
  const double scale = (in1 - in0) / out_size;
  const double filterscale = std::max(scale, 1.0);
  const double support = kSupport * filterscale;
  Coefficients c;
  c.ksize = static_cast<int>(std::ceil(support)) * 2 + 1;
  c.bounds.resize(static_cast<std::size_t>(out_size) * 2);
  std::vector<double> prekk(static_cast<std::size_t>(out_size) * c.ksize, 0.0);
  for (int xx = 0; xx < out_size; ++xx) {
    const double center = in0 + (xx + 0.5) * scale;
    const double ss = 1.0 / filterscale;
    int xmin = static_cast<int>(center - support + 0.5);
    if (xmin < 0) xmin = 0;
    int xmax = static_cast<int>(center + support + 0.5);
    if (xmax > in_size) xmax = in_size;
    xmax -= xmin;
    double* k = &prekk[static_cast<std::size_t>(xx) * c.ksize];
    double ww = 0.0;
    for (int x = 0; x < xmax; ++x) {
      const double w = bicubic_filter((x + xmin - center + 0.5) * ss);
      k[x] = w;
      ww += w;
    }
    for (int x = 0; x < xmax; ++x) {
      if (ww != 0.0) k[x] /= ww;
    }
    c.bounds[static_cast<std::size_t>(xx) * 2] = xmin;
    c.bounds[static_cast<std::size_t>(xx) * 2 + 1] = xmax;
  }
  c.kk.resize(prekk.size());
  for (std::size_t i = 0; i < prekk.size(); ++i) {
    const double v = prekk[i] * (1 << kPrecisionBits);
    c.kk[i] = static_cast<std::int32_t>(prekk[i] < 0 ? -0.5 + v : 0.5 + v);
  }
  return c;
}

std::uint8_t clip8(std::int32_t v) {
  if (v >= (1 << kPrecisionBits << 8)) return 255;
  if (v <= 0) return 0;
  return static_cast<std::uint8_t>(v >> kPrecisionBits);
}

}  // namespace

RgbImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::kDecode, "empty image data");
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::kDecode, "unrecognized image container (expected PNG or JPEG)");
}

RgbImage resize_bicubic(const RgbImage& src, int out_width, int out_height) {
  if (src.width <= 0 || src.height <= 0 || out_width <= 0 || out_height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "resize requires non-empty images");
  }
  if (out_width == src.width && out_height == src.height) return src;

  const auto horiz = precompute_coeffs(src.width, 0.0, src.width, out_width);
  const auto vert = precompute_coeffs(src.height, 0.0, src.height, out_height);
  const bool need_h = out_width != src.width;
  const bool need_v = out_height != src.height;

  // Horizontal pass only touches the source rows the vertical pass reads.
  const int ybox_first = vert.bounds[0];
  const int ybox_last = vert.bounds[static_cast<std::size_t>(out_height) * 2 - 2] +
                        vert.bounds[static_cast<std::size_t>(out_height) * 2 - 1];

  RgbImage tmp;
  const RgbImage* cur = &src;
  int row_offset = 0;
  if (need_h) {
    tmp.width = out_width;
    tmp.height = ybox_last - ybox_first;
    tmp.pixels.resize(static_cast<std::size_t>(tmp.width) * tmp.height * 3);
    for (int yy = 0; yy < tmp.height; ++yy) {
      const std::uint8_t* row = &src.pixels[static_cast<std::size_t>(yy + ybox_first) * src.width * 3];
      for (int xx = 0; xx < out_width; ++xx) {
        const int xmin = horiz.bounds[static_cast<std::size_t>(xx) * 2];
        const int xmax = horiz.bounds[static_cast<std::size_t>(xx) * 2 + 1];
        const std::int32_t* k = &horiz.kk[static_cast<std::size_t>(xx) * horiz.ksize];
        for (int ch = 0; ch < 3; ++ch) {
          std::int32_t ss = 1 << (kPrecisionBits - 1);
          for (int x = 0; x < xmax; ++x) ss += row[(x + xmin) * 3 + ch] * k[x];
          tmp.pixels[(static_cast<std::size_t>(yy) * out_width + xx) * 3 + ch] = clip8(ss);
        }
      }
    }
    cur = &tmp;
    row_offset = ybox_first;
  }
  if (!need_v) return *cur;

  RgbImage out;
  out.width = cur->width;
  out.height = out_height;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int yy = 0; yy < out_height; ++yy) {
    const int ymin = vert.bounds[static_cast<std::size_t>(yy) * 2] - row_offset;
    const int ymax = vert.bounds[static_cast<std::size_t>(yy) * 2 + 1];
    const std::int32_t* k = &vert.kk[static_cast<std::size_t>(yy) * vert.ksize];
    for (int xx = 0; xx < out.width; ++xx) {
      for (int ch = 0; ch < 3; ++ch) {
        std::int32_t ss = 1 << (kPrecisionBits - 1);
        for (int y = 0; y < ymax; ++y) {
          ss += cur->pixels[(static_cast<std::size_t>(y + ymin) * cur->width + xx) * 3 + ch] * k[y];
        }
        out.pixels[(static_cast<std::size_t>(yy) * out.width + xx) * 3 + ch] = clip8(ss);
      }
    }
  }
  return out;
}

RgbImage resize_shorter_side(const RgbImage& src, int size) {
  if (src.width <= 0 || src.height <= 0) throw Error(ErrorCode::kDecode, "image has zero area");
  const bool portrait = src.width <= src.height;
  const int shorter = portrait ? src.width : src.height;
  const int longer = portrait ? src.height : src.width;
  const int new_long = static_cast<int>(static_cast<double>(size) * longer / shorter);
  return portrait ? resize_bicubic(src, size, new_long) : resize_bicubic(src, new_long, size);
}

RgbImage center_crop(const RgbImage& src, int size) {
  if (src.width < size || src.height < size) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("cannot crop {}x{} to {}", src.width, src.height, size));
  }
  const int top = static_cast<int>(std::nearbyint((src.height - size) / 2.0));
  const int left = static_cast<int>(std::nearbyint((src.width - size) / 2.0));
  RgbImage out;
  out.width = size;
  out.height = size;
  out.pixels.resize(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) {
    std::memcpy(&out.pixels[static_cast<std::size_t>(y) * size * 3],
                &src.pixels[(static_cast<std::size_t>(y + top) * src.width + left) * 3],
                static_cast<std::size_t>(size) * 3);
  }
  return out;
}

ImageTensor preprocess_image(const RgbImage& image, const PreprocessConfig& config) {
  if (image.width <= 0 || image.height <= 0) throw Error(ErrorCode::kDecode, "image has zero area");
  const int s = config.image_size;
  const RgbImage cropped = center_crop(resize_shorter_side(image, s), s);
  ImageTensor t;
  t.size_ = s;
  t.values_.resize(static_cast<std::size_t>(3) * s * s);
  const std::size_t plane = static_cast<std::size_t>(s) * s;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      const float v = static_cast<float>(cropped.pixels[i * 3 + ch]) / 255.0f;
      t.values_[ch * plane + i] = (v - config.mean[ch]) / config.stdev[ch];
    }
  }
  return t;
}

ImageTensor preprocess_image(std::span<const std::uint8_t> encoded, const PreprocessConfig& config) {
  return preprocess_image(decode_image(encoded), config);
}

}  // namespace medzs
