#include "bitsel/bmp.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace bitsel {

namespace {

std::uint16_t rd16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t rd32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void wr16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void wr32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint8_t gray_from_bgr(std::uint8_t b, std::uint8_t g, std::uint8_t r) {
  if (b == g && g == r) return b;
  return static_cast<std::uint8_t>((77 * r + 150 * g + 29 * b) >> 8);
}

}  // namespace

Image8 read_bmp_gray(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open BMP file: " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 54 || buf[0] != 'B' || buf[1] != 'M')
    throw FormatError("not a BMP file: " + path.string());

  const std::uint32_t data_offset = rd32(&buf[10]);
  const std::uint32_t header_size = rd32(&buf[14]);
  if (header_size < 40) throw FormatError("unsupported BMP header in " + path.string());
  const std::int32_t width = static_cast<std::int32_t>(rd32(&buf[18]));
  std::int32_t height = static_cast<std::int32_t>(rd32(&buf[22]));
  const std::uint16_t bpp = rd16(&buf[28]);
  const std::uint32_t compression = rd32(&buf[30]);
  if (compression != 0) throw FormatError("compressed BMP not supported: " + path.string());
  if (bpp != 8 && bpp != 24 && bpp != 32)
    throw FormatError("unsupported BMP bit depth " + std::to_string(bpp) + " in " + path.string());
  const bool top_down = height < 0;
  if (top_down) height = -height;
  if (width <= 0 || height <= 0) throw FormatError("bad BMP dimensions in " + path.string());

  // Palette sits between the info header and the pixel data.
  const std::uint8_t* palette = nullptr;
  std::uint32_t palette_entries = 0;
  if (bpp == 8) {
    palette_entries = rd32(&buf[46]);
    if (palette_entries == 0) palette_entries = 256;
    palette = buf.data() + 14 + header_size;
    if (14 + header_size + 4 * palette_entries > buf.size())
      throw FormatError("truncated BMP palette in " + path.string());
  }

  const std::int64_t row_stride = ((static_cast<std::int64_t>(width) * bpp + 31) / 32) * 4;
  if (data_offset + row_stride * height > static_cast<std::int64_t>(buf.size()))
    throw FormatError("truncated BMP pixel data in " + path.string());

  Image8 img(height, width);
  for (std::int32_t y = 0; y < height; ++y) {
    const std::int32_t src_row = top_down ? y : height - 1 - y;
    const std::uint8_t* row = buf.data() + data_offset + src_row * row_stride;
    for (std::int32_t x = 0; x < width; ++x) {
      if (bpp == 8) {
        const std::uint8_t idx = row[x];
        if (idx >= palette_entries) throw FormatError("palette index out of range in " + path.string());
        const std::uint8_t* e = palette + 4 * idx;  // BGRA entry
        img(y, x) = gray_from_bgr(e[0], e[1], e[2]);
      } else {
        const std::uint8_t* px = row + x * (bpp / 8);
        img(y, x) = gray_from_bgr(px[0], px[1], px[2]);
      }
    }
  }
  return img;
}

void write_bmp_gray(const Image8& img, const std::filesystem::path& path) {
  const std::int64_t width = img.cols();
  const std::int64_t height = img.rows();
  const std::int64_t row_stride = (width + 3) / 4 * 4;
  const std::uint32_t data_offset = 14 + 40 + 256 * 4;
  const std::uint32_t file_size = static_cast<std::uint32_t>(data_offset + row_stride * height);

  std::vector<std::uint8_t> out;
  out.reserve(file_size);
  out.push_back('B');
  out.push_back('M');
  wr32(out, file_size);
  wr32(out, 0);
  wr32(out, data_offset);
  wr32(out, 40);
  wr32(out, static_cast<std::uint32_t>(width));
  wr32(out, static_cast<std::uint32_t>(height));
  wr16(out, 1);
  wr16(out, 8);
  wr32(out, 0);
  wr32(out, static_cast<std::uint32_t>(row_stride * height));
  wr32(out, 2835);
  wr32(out, 2835);
  wr32(out, 256);
  wr32(out, 0);
  for (int i = 0; i < 256; ++i) {
    out.push_back(static_cast<std::uint8_t>(i));
    out.push_back(static_cast<std::uint8_t>(i));
    out.push_back(static_cast<std::uint8_t>(i));
    out.push_back(0);
  }
  for (std::int64_t y = height - 1; y >= 0; --y) {
    for (std::int64_t x = 0; x < width; ++x) out.push_back(img(y, x));
    for (std::int64_t x = width; x < row_stride; ++x) out.push_back(0);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write BMP file: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to BMP file: " + path.string());
}

}  // namespace bitsel
