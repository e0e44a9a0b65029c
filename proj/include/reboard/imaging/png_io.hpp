#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <png.h>

#include "reboard/imaging/image.hpp"

namespace reboard::imaging {

namespace detail {

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline std::vector<std::uint8_t> decode(const std::vector<std::uint8_t>& bytes, png_uint_32 format,
                                        int& width, int& height) {
  PngImage png;
  if (!png_image_begin_read_from_memory(&png.image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::DecodeError, png.image.message);
  }
  png.image.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::DecodeError, png.image.message);
  }
  width = static_cast<int>(png.image.width);
  height = static_cast<int>(png.image.height);
  return pixels;
}

inline std::vector<std::uint8_t> encode(const std::uint8_t* pixels, int width, int height,
                                        png_uint_32 format) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(width);
  png.image.height = static_cast<png_uint_32>(height);
  png.image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png.image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::StorageFailure, png.image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png.image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorCode::StorageFailure, png.image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::StorageFailure, "cannot write " + path.string());
}

/// Decodes any 8-bit PNG (gray, RGB, palette, with or without alpha) to RGB.
inline RawFrame decode_png_rgb(const std::vector<std::uint8_t>& bytes, Timestamp ts = {}) {
  int w = 0, h = 0;
  auto pixels = detail::decode(bytes, PNG_FORMAT_RGB, w, h);
  return RawFrame(w, h, std::move(pixels), ts);
}

inline GrayImage decode_png_gray(const std::vector<std::uint8_t>& bytes) {
  int w = 0, h = 0;
  auto pixels = detail::decode(bytes, PNG_FORMAT_GRAY, w, h);
  return GrayImage(w, h, std::move(pixels));
}

inline std::vector<std::uint8_t> encode_png(const RawFrame& frame) {
  frame.validate();
  return detail::encode(frame.pixels.data(), frame.width, frame.height, PNG_FORMAT_RGB);
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  return detail::encode(img.data().data(), img.width(), img.height(), PNG_FORMAT_GRAY);
}

inline RawFrame read_png(const std::filesystem::path& path, Timestamp ts = {}) {
  return decode_png_rgb(read_file_bytes(path), ts);
}

inline void write_png(const std::filesystem::path& path, const RawFrame& frame) {
  write_file_bytes(path, encode_png(frame));
}

inline void write_png(const std::filesystem::path& path, const GrayImage& img) {
  write_file_bytes(path, encode_png(img));
}

}  // namespace reboard::imaging
