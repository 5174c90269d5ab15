#include "headlab/core/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

namespace headlab {
namespace {

const unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

uint32_t get_u32(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
         uint32_t(p[3]);
}

void write_chunk(std::vector<unsigned char>& out, const char type[4],
                 const std::vector<unsigned char>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, out.data() + start, static_cast<uInt>(4 + data.size()));
  put_u32(out, crc);
}

std::vector<unsigned char> deflate_bytes(const std::vector<unsigned char>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> out(bound);
  int rc = compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, "png: deflate failed");
  out.resize(bound);
  return out;
}

std::vector<unsigned char> inflate_bytes(const std::vector<unsigned char>& comp,
                                         size_t expected) {
  std::vector<unsigned char> out(expected);
  uLongf n = static_cast<uLongf>(expected);
  int rc = uncompress(out.data(), &n, comp.data(), static_cast<uLong>(comp.size()));
  require(rc == Z_OK && n == expected, "png: inflate failed or size mismatch");
  return out;
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(clamp01(v) * 255.0));
}

void write_png(const std::string& path, int h, int w, int channels,
               const std::vector<unsigned char>& pixels, const std::string& comment) {
  std::vector<unsigned char> file(kSignature, kSignature + 8);

  std::vector<unsigned char> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(w));
  put_u32(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);                                   // bit depth
  ihdr.push_back(channels == 3 ? 2 : 0);               // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(file, "IHDR", ihdr);

  if (!comment.empty()) {
    std::vector<unsigned char> text;
    const char* key = "comment";
    text.insert(text.end(), key, key + 7);
    text.push_back(0);
    text.insert(text.end(), comment.begin(), comment.end());
    write_chunk(file, "tEXt", text);
  }

  // Filter byte 0 per scanline.
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<size_t>(h) * (1 + static_cast<size_t>(w) * channels));
  for (int i = 0; i < h; ++i) {
    raw.push_back(0);
    const unsigned char* row = pixels.data() + static_cast<size_t>(i) * w * channels;
    raw.insert(raw.end(), row, row + static_cast<size_t>(w) * channels);
  }
  write_chunk(file, "IDAT", deflate_bytes(raw));
  write_chunk(file, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  require(f.good(), "png: cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(file.data()),
          static_cast<std::streamsize>(file.size()));
  require(f.good(), "png: write failed: " + path);
}

struct PngData {
  int h = 0, w = 0, channels = 0;
  std::vector<unsigned char> pixels;
  std::string comment;
};

PngData read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "png: cannot open " + path);
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  require(file.size() > 8 && std::memcmp(file.data(), kSignature, 8) == 0,
          "png: bad signature: " + path);

  PngData out;
  std::vector<unsigned char> idat;
  size_t pos = 8;
  bool saw_ihdr = false;
  while (pos + 12 <= file.size()) {
    uint32_t len = get_u32(file.data() + pos);
    require(pos + 12 + len <= file.size(), "png: truncated chunk: " + path);
    const char* type = reinterpret_cast<const char*>(file.data() + pos + 4);
    const unsigned char* data = file.data() + pos + 8;
    uint32_t crc_stored = get_u32(file.data() + pos + 8 + len);
    uint32_t crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, file.data() + pos + 4, 4 + len);
    require(crc == crc_stored, "png: chunk crc mismatch: " + path);

    if (std::memcmp(type, "IHDR", 4) == 0) {
      require(len == 13, "png: bad IHDR: " + path);
      out.w = static_cast<int>(get_u32(data));
      out.h = static_cast<int>(get_u32(data + 4));
      require(data[8] == 8, "png: unsupported bit depth: " + path);
      require(data[9] == 2 || data[9] == 0, "png: unsupported color type: " + path);
      out.channels = data[9] == 2 ? 3 : 1;
      require(data[12] == 0, "png: interlaced not supported: " + path);
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "tEXt", 4) == 0) {
      const unsigned char* sep = data;
      const unsigned char* end = data + len;
      while (sep < end && *sep != 0) ++sep;
      if (sep + 1 < end) out.comment.assign(sep + 1, end);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  require(saw_ihdr && !idat.empty(), "png: missing chunks: " + path);

  size_t stride = static_cast<size_t>(out.w) * out.channels;
  std::vector<unsigned char> raw = inflate_bytes(idat, static_cast<size_t>(out.h) * (stride + 1));
  out.pixels.resize(static_cast<size_t>(out.h) * stride);
  for (int i = 0; i < out.h; ++i) {
    const unsigned char* row = raw.data() + static_cast<size_t>(i) * (stride + 1);
    require(row[0] == 0, "png: unsupported filter type: " + path);
    std::memcpy(out.pixels.data() + static_cast<size_t>(i) * stride, row + 1, stride);
  }
  return out;
}

}  // namespace

void write_png_rgb(const std::string& path, const Image& img, const std::string& comment) {
  const int h = img.rows(), w = img.cols();
  std::vector<unsigned char> px(static_cast<size_t>(h) * w * 3);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      size_t k = (static_cast<size_t>(i) * w + j) * 3;
      px[k] = to_byte(img.r(i, j));
      px[k + 1] = to_byte(img.g(i, j));
      px[k + 2] = to_byte(img.b(i, j));
    }
  write_png(path, h, w, 3, px, comment);
}

void write_png_gray(const std::string& path, const Mat& m, const std::string& comment) {
  const int h = static_cast<int>(m.rows()), w = static_cast<int>(m.cols());
  std::vector<unsigned char> px(static_cast<size_t>(h) * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) px[static_cast<size_t>(i) * w + j] = to_byte(m(i, j));
  write_png(path, h, w, 1, px, comment);
}

Image read_png_rgb(const std::string& path) {
  PngData d = read_png(path);
  require(d.channels == 3, "png: expected RGB: " + path);
  Image img(d.h, d.w);
  for (int i = 0; i < d.h; ++i)
    for (int j = 0; j < d.w; ++j) {
      size_t k = (static_cast<size_t>(i) * d.w + j) * 3;
      img.r(i, j) = d.pixels[k] / 255.0;
      img.g(i, j) = d.pixels[k + 1] / 255.0;
      img.b(i, j) = d.pixels[k + 2] / 255.0;
    }
  return img;
}

Mat read_png_gray(const std::string& path) {
  PngData d = read_png(path);
  require(d.channels == 1, "png: expected grayscale: " + path);
  Mat m(d.h, d.w);
  for (int i = 0; i < d.h; ++i)
    for (int j = 0; j < d.w; ++j) m(i, j) = d.pixels[static_cast<size_t>(i) * d.w + j] / 255.0;
  return m;
}

std::optional<std::string> read_png_comment(const std::string& path) {
  PngData d = read_png(path);
  if (d.comment.empty()) return std::nullopt;
  return d.comment;
}

}  // namespace headlab
