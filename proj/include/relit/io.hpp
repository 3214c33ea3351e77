#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "relit/color.hpp"
#include "relit/envmap.hpp"
#include "relit/image.hpp"

namespace relit {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

// Reads one whitespace-delimited header token starting at `pos`.
inline std::string next_token(const std::vector<unsigned char>& buf, std::size_t& pos) {
  while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos])) tok.push_back(static_cast<char>(buf[pos++]));
  return tok;
}

inline float byteswap_float(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PFM. Written little-endian with scale -1.0; rows are stored bottom-to-top.

inline std::string encode_pfm(const LinearImage& img) {
  std::ostringstream os(std::ios::binary);
  os << (img.channels() == 3 ? "PF" : "Pf") << '\n'
     << img.width() << ' ' << img.height() << '\n'
     << "-1.0\n";
  std::string out = os.str();
  const std::size_t row = static_cast<std::size_t>(img.width()) * img.channels();
  std::vector<float> buf(row);
  for (int y = img.height() - 1; y >= 0; --y) {
    auto src = img.data().subspan(img.index(0, y), row);
    std::copy(src.begin(), src.end(), buf.begin());
    if constexpr (std::endian::native == std::endian::big)
      for (float& v : buf) v = detail::byteswap_float(v);
    out.append(reinterpret_cast<const char*>(buf.data()), row * sizeof(float));
  }
  return out;
}

inline LinearImage decode_pfm(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  std::string magic = detail::next_token(bytes, pos);
  int channels = magic == "PF" ? 3 : magic == "Pf" ? 1 : 0;
  if (!channels) throw IoError("PFM: bad magic");
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(detail::next_token(bytes, pos));
    h = std::stoi(detail::next_token(bytes, pos));
    scale = std::stod(detail::next_token(bytes, pos));
  } catch (const std::exception&) {
    throw IoError("PFM: malformed header");
  }
  ++pos;  // single whitespace byte after the scale
  if (w <= 0 || h <= 0 || scale == 0.0) throw IoError("PFM: bad dimensions or scale");
  const std::size_t row = static_cast<std::size_t>(w) * channels;
  if (bytes.size() < pos + row * h * sizeof(float)) throw IoError("PFM: truncated data");
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);
  LinearImage img(w, h, channels);
  for (int r = 0; r < h; ++r) {
    int y = h - 1 - r;
    float* dst = img.data().data() + img.index(0, y);
    std::memcpy(dst, bytes.data() + pos + r * row * sizeof(float), row * sizeof(float));
    if (swap)
      for (std::size_t i = 0; i < row; ++i) dst[i] = detail::byteswap_float(dst[i]);
  }
  return img;
}

inline void write_pfm(const fs::path& path, const LinearImage& img) {
  detail::write_file(path, encode_pfm(img));
}

inline LinearImage read_pfm(const fs::path& path) {
  return decode_pfm(detail::read_file(path));
}

// ---------------------------------------------------------------------------
// Radiance RGBE (.hdr). Reads flat and new-style RLE scanlines; writes RLE.

namespace detail {

inline void float_to_rgbe(const float rgb[3], unsigned char out[4]) {
  float v = std::max({rgb[0], rgb[1], rgb[2]});
  if (v < 1e-32f) {
    out[0] = out[1] = out[2] = out[3] = 0;
    return;
  }
  int e;
  float m = std::frexp(v, &e) * 256.0f / v;
  out[0] = static_cast<unsigned char>(std::max(0.0f, rgb[0]) * m);
  out[1] = static_cast<unsigned char>(std::max(0.0f, rgb[1]) * m);
  out[2] = static_cast<unsigned char>(std::max(0.0f, rgb[2]) * m);
  out[3] = static_cast<unsigned char>(e + 128);
}

inline void rgbe_to_float(const unsigned char in[4], float rgb[3]) {
  if (in[3] == 0) {
    rgb[0] = rgb[1] = rgb[2] = 0.0f;
    return;
  }
  float f = std::ldexp(1.0f, static_cast<int>(in[3]) - (128 + 8));
  for (int c = 0; c < 3; ++c) rgb[c] = (in[c] + 0.5f) * f;
}

inline void rle_encode_channel(const unsigned char* data, int n, std::string& out) {
  int i = 0;
  while (i < n) {
    int run = 1;
    while (i + run < n && run < 127 && data[i + run] == data[i]) ++run;
    if (run >= 4) {
      out.push_back(static_cast<char>(128 + run));
      out.push_back(static_cast<char>(data[i]));
      i += run;
      continue;
    }
    int start = i;
    int count = 0;
    while (i < n && count < 128) {
      int r = 1;
      while (i + r < n && r < 4 && data[i + r] == data[i]) ++r;
      if (r >= 4) break;
      ++i;
      ++count;
    }
    out.push_back(static_cast<char>(count));
    out.append(reinterpret_cast<const char*>(data + start), count);
  }
}

}  // namespace detail

inline std::string encode_rgbe(const LinearImage& img) {
  if (img.channels() != 3) throw IoError("RGBE: needs a 3-channel image");
  std::string out = "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n";
  out += "-Y " + std::to_string(img.height()) + " +X " + std::to_string(img.width()) + "\n";
  const int w = img.width();
  std::vector<unsigned char> scan(static_cast<std::size_t>(w) * 4);
  std::vector<unsigned char> chan(w);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      float rgb[3] = {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
      detail::float_to_rgbe(rgb, &scan[static_cast<std::size_t>(x) * 4]);
    }
    if (w < 8 || w > 0x7fff) {
      out.append(reinterpret_cast<const char*>(scan.data()), scan.size());
      continue;
    }
    out.push_back(2);
    out.push_back(2);
    out.push_back(static_cast<char>(w >> 8));
    out.push_back(static_cast<char>(w & 0xff));
    for (int c = 0; c < 4; ++c) {
      for (int x = 0; x < w; ++x) chan[x] = scan[static_cast<std::size_t>(x) * 4 + c];
      detail::rle_encode_channel(chan.data(), w, out);
    }
  }
  return out;
}

inline LinearImage decode_rgbe(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  auto read_line = [&]() {
    std::string line;
    while (pos < bytes.size() && bytes[pos] != '\n') line.push_back(static_cast<char>(bytes[pos++]));
    if (pos >= bytes.size()) throw IoError("RGBE: truncated header");
    ++pos;
    return line;
  };
  std::string first = read_line();
  if (first.rfind("#?", 0) != 0) throw IoError("RGBE: missing #? signature");
  for (;;) {
    std::string line = read_line();
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0 && line != "FORMAT=32-bit_rle_rgbe")
      throw IoError("RGBE: unsupported format " + line);
  }
  std::string res = read_line();
  char ya[3] = {}, xa[3] = {};
  int h = 0, w = 0;
  if (std::sscanf(res.c_str(), "%2s %d %2s %d", ya, &h, xa, &w) != 4 ||
      std::string(ya) != "-Y" || std::string(xa) != "+X" || w <= 0 || h <= 0)
    throw IoError("RGBE: unsupported resolution line '" + res + "'");

  LinearImage img(w, h, 3);
  std::vector<unsigned char> scan(static_cast<std::size_t>(w) * 4);
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw IoError("RGBE: truncated pixel data");
  };
  for (int y = 0; y < h; ++y) {
    need(4);
    bool rle = w >= 8 && w <= 0x7fff && bytes[pos] == 2 && bytes[pos + 1] == 2 &&
               (bytes[pos + 2] & 0x80) == 0;
    if (!rle) {
      need(static_cast<std::size_t>(w) * 4);
      std::memcpy(scan.data(), bytes.data() + pos, scan.size());
      pos += scan.size();
    } else {
      int len = (bytes[pos + 2] << 8) | bytes[pos + 3];
      if (len != w) throw IoError("RGBE: scanline width mismatch");
      pos += 4;
      for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < w) {
          need(1);
          int count = bytes[pos++];
          if (count > 128) {
            count -= 128;
            need(1);
            if (x + count > w) throw IoError("RGBE: bad run length");
            unsigned char v = bytes[pos++];
            for (int i = 0; i < count; ++i) scan[static_cast<std::size_t>(x++) * 4 + c] = v;
          } else {
            if (count == 0 || x + count > w) throw IoError("RGBE: bad literal length");
            need(count);
            for (int i = 0; i < count; ++i) scan[static_cast<std::size_t>(x++) * 4 + c] = bytes[pos++];
          }
        }
      }
    }
    for (int x = 0; x < w; ++x) {
      float rgb[3];
      detail::rgbe_to_float(&scan[static_cast<std::size_t>(x) * 4], rgb);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
    }
  }
  return img;
}

inline void write_hdr(const fs::path& path, const LinearImage& img) {
  detail::write_file(path, encode_rgbe(img));
}

inline LinearImage read_hdr(const fs::path& path) { return decode_rgbe(detail::read_file(path)); }

inline EnvironmentMap read_env(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return EnvironmentMap(ext == ".pfm" ? read_pfm(path) : read_hdr(path));
}

// ---------------------------------------------------------------------------
// 8-bit PNG. encode_png quantizes an already display-encoded image in [0,1].

namespace detail {

struct PngWriteState {
  std::string* out;
};

inline void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngWriteState*>(png_get_io_ptr(png));
  st->out->append(reinterpret_cast<const char*>(data), len);
}

inline void png_flush_cb(png_structp) {}

struct PngReadState {
  const std::vector<unsigned char>* in;
  std::size_t pos;
};

inline void png_read_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + len > st->in->size()) png_error(png, "truncated PNG");
  std::memcpy(data, st->in->data() + st->pos, len);
  st->pos += len;
}

[[noreturn]] inline void png_error_cb(png_structp, png_const_charp msg) { throw IoError(std::string("PNG: ") + msg); }
inline void png_warning_cb(png_structp, png_const_charp) {}

}  // namespace detail

inline std::string encode_png(const LinearImage& display) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_cb,
                                            detail::png_warning_cb);
  if (!png) throw IoError("PNG: cannot create writer");
  png_infop info = png_create_info_struct(png);
  detail::PngWriteState st{&out};
  try {
    png_set_write_fn(png, &st, detail::png_write_cb, detail::png_flush_cb);
    const int ch = display.channels();
    png_set_IHDR(png, info, display.width(), display.height(), 8,
                 ch == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(display.width()) * ch);
    for (int y = 0; y < display.height(); ++y) {
      for (int x = 0; x < display.width(); ++x)
        for (int c = 0; c < ch; ++c) {
          double v = std::clamp(static_cast<double>(display.at(x, y, c)), 0.0, 1.0);
          row[static_cast<std::size_t>(x) * ch + c] = static_cast<png_byte>(std::lround(v * 255.0));
        }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

// Returns display values in [0,1]; grey PNGs decode to one channel.
inline LinearImage decode_png(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8)) throw IoError("PNG: bad signature");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_error_cb,
                                           detail::png_warning_cb);
  if (!png) throw IoError("PNG: cannot create reader");
  png_infop info = png_create_info_struct(png);
  detail::PngReadState st{&bytes, 0};
  LinearImage img;
  try {
    png_set_read_fn(png, &st, detail::png_read_cb);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    int w = static_cast<int>(png_get_image_width(png, info));
    int h = static_cast<int>(png_get_image_height(png, info));
    int ch = png_get_channels(png, info);
    if (ch != 1 && ch != 3) throw IoError("PNG: unsupported channel layout");
    img = LinearImage(w, h, ch);
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    for (int y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c)
          img.at(x, y, c) = row[static_cast<std::size_t>(x) * ch + c] / 255.0f;
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const fs::path& path, const LinearImage& display) {
  detail::write_file(path, encode_png(display));
}

inline LinearImage read_png(const fs::path& path) { return decode_png(detail::read_file(path)); }

// Loads an image for display-domain comparison: PNG as-is, PFM gamma-encoded.
inline LinearImage read_display_image(const fs::path& path, double gamma = kDefaultGamma) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".png") return read_png(path);
  return gamma_encode(read_pfm(path), gamma);
}

inline Mask read_mask(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return Mask::from_image(ext == ".png" ? read_png(path) : read_pfm(path));
}

}  // namespace relit
