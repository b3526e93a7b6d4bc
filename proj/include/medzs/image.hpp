// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace medzs {

/// 8-bit interleaved RGB, row-major (height x width x 3).
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Decodes PNG or JPEG bytes. Grayscale inputs are replicated across the
/// three channels and alpha is dropped.
RgbImage decode_image(std::span<const std::uint8_t> bytes);

/// Antialiased bicubic resampling (a = -0.5) with the same fixed-point
/// arithmetic and separable horizontal-then-vertical passes as Pillow, so
/// results match the reference CLIP preprocessing bit for bit.
RgbImage resize_bicubic(const RgbImage& src, int out_width, int out_height);

/// Scales so the shorter side equals `size`; the longer side is truncated
/// the same way torchvision computes it.
RgbImage resize_shorter_side(const RgbImage& src, int size);

/// Square crop centered the way torchvision does (round-half-even offsets).
RgbImage center_crop(const RgbImage& src, int size);

struct PreprocessConfig {
  int image_size = 224;
  std::array<float, 3> mean{0.48145466f, 0.4578275f, 0.40821073f};
  std::array<float, 3> stdev{0.26862954f, 0.26130258f, 0.27577711f};
};

/// Channel-planar standardized pixels, 3 x size x size.
class ImageTensor {
 public:
  int size() const noexcept { return size_; }
  std::span<const float> values() const noexcept { return values_; }

 private:
  friend ImageTensor preprocess_image(std::span<const std::uint8_t>, const PreprocessConfig&);
  friend ImageTensor preprocess_image(const RgbImage&, const PreprocessConfig&);

  int size_ = 0;
  std::vector<float> values_;
};

ImageTensor preprocess_image(std::span<const std::uint8_t> encoded, const PreprocessConfig& config);
ImageTensor preprocess_image(const RgbImage& image, const PreprocessConfig& config);

}  // namespace medzs
