#pragma once

// Interleaved 8-bit image plumbing: PNG/JPEG decode (forced to RGB), PNG
// encode (gray or RGB), bilinear resize, horizontal flip, the conversions
// between images and model tensors, and small visualization helpers.

#include "pestvl/errors.hpp"
#include "pestvl/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pestvl::image {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;  // 1 (gray) or 3 (RGB), row-major interleaved
  std::vector<uint8_t> pixels;

  uint8_t& at(int y, int x, int c) {
    return pixels[size_t(y * width + x) * size_t(channels) + size_t(c)];
  }
  uint8_t at(int y, int x, int c) const {
    return pixels[size_t(y * width + x) * size_t(channels) + size_t(c)];
  }
};

// Decodes PNG or JPEG (sniffed from magic bytes) into 3-channel RGB.
Image readImage(const std::string& path);
void writePng(const std::string& path, const Image& img);

Image resizeBilinear(const Image& img, int width, int height);
Image flipHorizontal(const Image& img);

// Luminance in [0,1], height x width.
Matrixd toGray(const Image& img);

// Model input tokens: (height*width) x channels, pixel/255 - 0.5.
Matrixf toTokens(const Image& img);

// Visualization: [0,1] matrices to 8-bit gray or jet-colored RGB.
Image grayImage(const Matrixd& values);
Image colormapJet(const Matrixd& values);

// One-pixel rectangle outline, clipped to the image bounds.
void drawRect(Image& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
              uint8_t b);

}  // namespace pestvl::image
