#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <csetjmp>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "mirage/errors.hpp"
#include "mirage/image.hpp"

namespace mirage::io {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) {
    throw IoError("cannot open " + path.string());
  }
  return f;
}

// libjpeg's default error handler calls exit(); route through longjmp instead.
struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  std::longjmp(mgr->jump, 1);
}

inline void write_png16(std::FILE* out, const ImageTensor& img, const std::string& what) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_byte> data;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG " + what);
  }

  const ImageShape& shape = img.shape();
  png_init_io(png, out);
  png_set_IHDR(png, info, shape.width, shape.height, 16,
               shape.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  // PNG stores 16-bit samples big endian.
  const std::size_t samples = shape.pixel_count();
  data.resize(samples * 2);
  auto src = img.pixels();
  for (std::size_t i = 0; i < samples; ++i) {
    const auto v = static_cast<std::uint16_t>(
        std::lround(std::clamp(src[i], 0.0, 1.0) * 65535.0));
    data[2 * i] = static_cast<png_byte>(v >> 8);
    data[2 * i + 1] = static_cast<png_byte>(v & 0xff);
  }
  const std::size_t rowbytes = static_cast<std::size_t>(shape.width) * shape.channels * 2;
  row_ptrs.resize(shape.height);
  for (int y = 0; y < shape.height; ++y) {
    row_ptrs[y] = data.data() + y * rowbytes;
  }
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// Read a PNG file into an ImageTensor. Any bit depth is accepted; palette
/// images are expanded, alpha is stripped, gray stays single channel.
inline ImageTensor load_png(const std::filesystem::path& path) {
  auto file = detail::open_file(path, "rb");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> data;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG " + path.string());
  }

  png_init_io(png, file.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  png_byte bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG channel count " + std::to_string(channels));
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * height);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    row_ptrs[y] = data.data() + y * rowbytes;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageShape shape{static_cast<int>(height), static_cast<int>(width), channels};
  std::vector<double> pixels(shape.pixel_count());
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const unsigned hi = data[2 * i];
      const unsigned lo = data[2 * i + 1];
      pixels[i] = static_cast<double>((hi << 8) | lo) / 65535.0;
    }
  } else {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      pixels[i] = static_cast<double>(data[i]) / 255.0;
    }
  }
  return ImageTensor::create(shape, std::move(pixels));
}

/// Write a 16-bit-per-channel PNG. Pixels are rounded onto the k/65535
/// grid, so images already on that grid round-trip exactly.
inline void save_png16(const ImageTensor& img, const std::filesystem::path& path) {
  auto file = detail::open_file(path, "wb");
  detail::write_png16(file.get(), img, path.string());
}

/// Encode a 16-bit PNG into memory (used for data-URL payloads).
inline std::string encode_png16(const ImageTensor& img) {
  std::FILE* tmp = std::tmpfile();
  if (!tmp) throw IoError("tmpfile failed");
  detail::FilePtr guard(tmp);

  detail::write_png16(tmp, img, "<memory>");

  std::fflush(tmp);
  const long size = std::ftell(tmp);
  if (size < 0) throw IoError("ftell failed");
  std::rewind(tmp);
  std::string bytes(static_cast<std::size_t>(size), '\0');
  if (std::fread(bytes.data(), 1, bytes.size(), tmp) != bytes.size()) {
    throw IoError("short read from temporary PNG buffer");
  }
  return bytes;
}

/// Decode a PNG held in memory (e.g. from a data-URL payload).
inline ImageTensor decode_png(const std::string& bytes) {
  struct Reader {
    const std::string* data;
    std::size_t offset;
  } reader{&bytes, 0};

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> data;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode in-memory PNG");
  }

  png_set_read_fn(png, &reader, [](png_structp p, png_bytep out, png_size_t len) {
    auto* r = static_cast<Reader*>(png_get_io_ptr(p));
    if (r->offset + len > r->data->size()) {
      png_error(p, "unexpected end of PNG buffer");
    }
    std::copy_n(r->data->data() + r->offset, len, reinterpret_cast<char*>(out));
    r->offset += len;
  });

  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const png_byte color_type = png_get_color_type(png, info);
  png_byte bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG channel count " + std::to_string(channels));
  }
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  data.resize(rowbytes * height);
  row_ptrs.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    row_ptrs[y] = data.data() + y * rowbytes;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  ImageShape shape{static_cast<int>(height), static_cast<int>(width), channels};
  std::vector<double> pixels(shape.pixel_count());
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const unsigned hi = data[2 * i];
      const unsigned lo = data[2 * i + 1];
      pixels[i] = static_cast<double>((hi << 8) | lo) / 65535.0;
    }
  } else {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      pixels[i] = static_cast<double>(data[i]) / 255.0;
    }
  }
  return ImageTensor::create(shape, std::move(pixels));
}

/// Read a baseline JPEG into an ImageTensor (8-bit RGB or grayscale).
inline ImageTensor load_jpeg(const std::filesystem::path& path) {
  auto file = detail::open_file(path, "rb");

  jpeg_decompress_struct cinfo{};
  detail::JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = detail::jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("failed to decode JPEG " + path.string());
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  jpeg_start_decompress(&cinfo);

  const int width = static_cast<int>(cinfo.output_width);
  const int height = static_cast<int>(cinfo.output_height);
  const int channels = cinfo.output_components;
  if (channels != 1 && channels != 3) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("unsupported JPEG channel count " + std::to_string(channels));
  }

  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels;
  std::vector<unsigned char> row(rowbytes);
  std::vector<double> pixels(static_cast<std::size_t>(height) * rowbytes);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* rowp = row.data();
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    const std::size_t y = cinfo.output_scanline - 1;
    for (std::size_t i = 0; i < rowbytes; ++i) {
      pixels[y * rowbytes + i] = static_cast<double>(row[i]) / 255.0;
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  return ImageTensor::create(ImageShape{height, width, channels}, std::move(pixels));
}

/// Load a PNG or JPEG, dispatching on the file's magic bytes.
inline ImageTensor load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char magic[4] = {0, 0, 0, 0};
  in.read(reinterpret_cast<char*>(magic), 4);
  in.close();
  if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
    return load_png(path);
  }
  if (magic[0] == 0xff && magic[1] == 0xd8) {
    return load_jpeg(path);
  }
  throw IoError("unrecognized image format: " + path.string());
}

}  // namespace mirage::io
