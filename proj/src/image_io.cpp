#include "pestvl/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <jpeglib.h>

namespace pestvl::image {

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

void jpegErrorExit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  longjmp(mgr->jump, 1);
}

Image readJpeg(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw DataError("cannot open image: " + path);

  jpeg_decompress_struct cinfo;
  JpegErrorMgr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpegErrorExit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw DataError("corrupt JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  Image img;
  img.width = int(cinfo.output_width);
  img.height = int(cinfo.output_height);
  img.channels = 3;
  img.pixels.resize(size_t(img.width) * size_t(img.height) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() +
                   size_t(cinfo.output_scanline) * size_t(img.width) * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return img;
}

Image readPng(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw DataError("cannot read PNG: " + path + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img;
  img.width = int(png.width);
  img.height = int(png.height);
  img.channels = 3;
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw DataError("cannot decode PNG: " + path + ": " + png.message);
  }
  return img;
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

uint8_t toByte(double v) {
  return uint8_t(std::lround(clamp01(v) * 255.0));
}

}  // namespace

Image readImage(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw DataError("cannot open image: " + path);
  unsigned char magic[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(magic), 2);
  probe.close();
  if (magic[0] == 0x89 && magic[1] == 'P') return readPng(path);
  if (magic[0] == 0xff && magic[1] == 0xd8) return readJpeg(path);
  throw DataError("unsupported image format (not PNG or JPEG): " + path);
}

void writePng(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw DataError("PNG writer expects 1 or 3 channels");
  }
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = png_uint_32(img.width);
  png.height = png_uint_32(img.height);
  png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0,
                               nullptr)) {
    throw DataError("cannot write PNG: " + path + ": " + png.message);
  }
}

Image resizeBilinear(const Image& img, int width, int height) {
  if (width < 1 || height < 1) throw DataError("resize target must be positive");
  Image out;
  out.width = width;
  out.height = height;
  out.channels = img.channels;
  out.pixels.resize(size_t(width) * size_t(height) * size_t(img.channels));
  const double sx = double(img.width) / double(width);
  const double sy = double(img.height) / double(height);
  for (int y = 0; y < height; ++y) {
    const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
    const int y0 = std::min(int(fy), img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - double(y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
      const int x0 = std::min(int(fx), img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - double(x0);
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(y, x, c) = uint8_t(std::lround((1.0 - wy) * top + wy * bot));
      }
    }
  }
  return out;
}

Image flipHorizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Matrixd toGray(const Image& img) {
  Matrixd out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (img.channels == 1) {
        out(y, x) = img.at(y, x, 0) / 255.0;
      } else {
        out(y, x) = (0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                     0.114 * img.at(y, x, 2)) /
                    255.0;
      }
    }
  }
  return out;
}

Matrixf toTokens(const Image& img) {
  Matrixf out(Index(img.height) * img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out(Index(y) * img.width + x, c) = float(img.at(y, x, c)) / 255.0f - 0.5f;
  return out;
}

Image grayImage(const Matrixd& values) {
  Image img;
  img.height = int(values.rows());
  img.width = int(values.cols());
  img.channels = 1;
  img.pixels.resize(size_t(img.width) * size_t(img.height));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) img.at(y, x, 0) = toByte(values(y, x));
  return img;
}

Image colormapJet(const Matrixd& values) {
  Image img;
  img.height = int(values.rows());
  img.width = int(values.cols());
  img.channels = 3;
  img.pixels.resize(size_t(img.width) * size_t(img.height) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = clamp01(values(y, x));
      img.at(y, x, 0) = toByte(1.5 - std::abs(4.0 * v - 3.0));
      img.at(y, x, 1) = toByte(1.5 - std::abs(4.0 * v - 2.0));
      img.at(y, x, 2) = toByte(1.5 - std::abs(4.0 * v - 1.0));
    }
  }
  return img;
}

void drawRect(Image& img, int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
              uint8_t b) {
  if (img.channels != 3) throw DataError("drawRect expects an RGB image");
  auto plot = [&](int y, int x) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    img.at(y, x, 0) = r;
    img.at(y, x, 1) = g;
    img.at(y, x, 2) = b;
  };
  for (int x = x0; x <= x1; ++x) {
    plot(y0, x);
    plot(y1, x);
  }
  for (int y = y0; y <= y1; ++y) {
    plot(y, x0);
    plot(y, x1);
  }
}

}  // namespace pestvl::image
