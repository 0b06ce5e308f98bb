#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "mfsr/errors.hpp"
#include "mfsr/image.hpp"

namespace mfsr {

enum class PgmMode { Binary, Ascii };

namespace detail {

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char ch = static_cast<unsigned char>(bytes_[pos_]);
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(ch)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // Unsigned decimal token; comments are allowed before it.
  std::uint64_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw FormatError(std::string("truncated PGM: missing ") + what);
    if (!std::isdigit(static_cast<unsigned char>(bytes_[pos_])))
      throw FormatError(std::string("malformed PGM: expected ") + what);
    std::uint64_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::uint64_t>(bytes_[pos_] - '0');
      if (v > (1ull << 40)) throw FormatError(std::string("malformed PGM: ") + what + " too large");
      ++pos_;
    }
    if (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_])) &&
        bytes_[pos_] != '#')
      throw FormatError(std::string("malformed PGM: bad character after ") + what);
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::string_view rest() const { return bytes_.substr(pos_); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Decodes a P2 or P5 graymap. Pixel values are returned unscaled.
inline ImageGrid read_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw FormatError("malformed PGM: expected magic P2 or P5");
  const bool binary = bytes[1] == '5';
  detail::PgmCursor cur(bytes);
  cur.advance(2);
  if (cur.rest().empty()) throw FormatError("truncated PGM header");
  if (!std::isspace(static_cast<unsigned char>(cur.rest()[0])) && cur.rest()[0] != '#')
    throw FormatError("malformed PGM: bad magic");

  const auto width = cur.number("width");
  const auto height = cur.number("height");
  const auto maxval = cur.number("maxval");
  if (width == 0 || height == 0) throw FormatError("malformed PGM: zero dimension");
  if (maxval == 0 || maxval > 65535) throw FormatError("malformed PGM: maxval out of range");

  ImageGrid img(height, width);
  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (cur.rest().empty()) throw FormatError("truncated PGM: no raster");
    cur.advance(1);
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const auto raster = cur.rest();
    if (raster.size() < width * height * bpp) throw FormatError("truncated PGM raster");
    std::size_t k = 0;
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        std::uint32_t v = static_cast<unsigned char>(raster[k++]);
        if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(raster[k++]);
        if (v > maxval) throw FormatError("PGM sample exceeds maxval");
        img(r, c) = static_cast<double>(v);
      }
  } else {
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) {
        const auto v = cur.number("sample");
        if (v > maxval) throw FormatError("PGM sample exceeds maxval");
        img(r, c) = static_cast<double>(v);
      }
  }
  return img;
}

inline std::uint32_t quantize(double v, std::uint32_t maxval) {
  if (!std::isfinite(v)) return 0;
  return static_cast<std::uint32_t>(std::lround(std::clamp(v, 0.0, static_cast<double>(maxval))));
}

inline std::string write_pgm(const ImageGrid& img, PgmMode mode = PgmMode::Binary,
                             std::uint32_t maxval = 255) {
  if (maxval == 0 || maxval > 65535) throw DomainError("PGM maxval must be in 1..65535");
  std::string out = mode == PgmMode::Binary ? "P5\n" : "P2\n";
  out += std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n" +
         std::to_string(maxval) + "\n";
  if (mode == PgmMode::Binary) {
    for (std::size_t r = 0; r < img.height(); ++r)
      for (std::size_t c = 0; c < img.width(); ++c) {
        const auto q = quantize(img(r, c), maxval);
        if (maxval > 255) out.push_back(static_cast<char>(q >> 8));
        out.push_back(static_cast<char>(q & 0xff));
      }
  } else {
    for (std::size_t r = 0; r < img.height(); ++r) {
      for (std::size_t c = 0; c < img.width(); ++c) {
        if (c) out.push_back(' ');
        out += std::to_string(quantize(img(r, c), maxval));
      }
      out.push_back('\n');
    }
  }
  return out;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline ImageGrid read_pgm_file(const std::filesystem::path& path) {
  try {
    return read_pgm(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_pgm_file(const std::filesystem::path& path, const ImageGrid& img,
                           PgmMode mode = PgmMode::Binary, std::uint32_t maxval = 255) {
  write_file_bytes(path, write_pgm(img, mode, maxval));
}

}  // namespace mfsr
