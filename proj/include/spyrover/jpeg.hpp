#pragma once

// JPEG codec at the gateway boundary (libjpeg). Only the streaming and
// snapshot paths use this; correctness tests work on raw FrameBuffers.

#include <jpeglib.h>

#include <cstdio>
#include <cstdlib>
#include <csetjmp>
#include <stdexcept>
#include <string>
#include <vector>

#include "spyrover/video.hpp"

namespace spyrover::jpeg {

namespace detail {
struct ErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void on_error(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<ErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}
}  // namespace detail

/// Encodes tightly packed RGB rows.
inline std::vector<std::uint8_t> encode_rgb(const std::uint8_t* rgb, int width, int height, int quality = 80) {
  if (!rgb || width <= 0 || height <= 0) throw std::invalid_argument("jpeg encode: empty image");
  jpeg_compress_struct cinfo{};
  detail::ErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = detail::on_error;

  unsigned char* out = nullptr;
  unsigned long out_size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(out);
    throw std::runtime_error(std::string("jpeg encode failed: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &out, &out_size);
  cinfo.image_width = static_cast<JDIMENSION>(width);
  cinfo.image_height = static_cast<JDIMENSION>(height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    auto* row = const_cast<JSAMPLE*>(rgb + static_cast<std::size_t>(cinfo.next_scanline) * width * 3);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> bytes(out, out + out_size);
  std::free(out);
  return bytes;
}

/// Encodes a frame in viewer orientation.
inline std::vector<std::uint8_t> encode_frame(const video::FrameBuffer& fb, int quality = 80) {
  const auto rgb = video::viewer_rgb(fb);
  return encode_rgb(rgb.data(), fb.width_px, fb.height_px, quality);
}

struct DecodedImage {
  int width = 0;
  int height = 0;
  int components = 0;
  std::vector<std::uint8_t> pixels;
};

inline DecodedImage decode(const std::uint8_t* data, std::size_t size) {
  jpeg_decompress_struct cinfo{};
  detail::ErrorManager err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = detail::on_error;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error(std::string("jpeg decode failed: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, const_cast<unsigned char*>(data), static_cast<unsigned long>(size));
  jpeg_read_header(&cinfo, TRUE);
  jpeg_start_decompress(&cinfo);
  DecodedImage img;
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.components = cinfo.output_components;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.components);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPLE* row = img.pixels.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * img.components;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace spyrover::jpeg
