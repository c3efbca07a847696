#pragma once

// Binary PPM (P6) / PGM (P5) with maxval 255, mapped to [0, 1], and PFM
// ("PF" colour, "Pf" grey) 32-bit float images. Tensors are (1, c, h, w).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gunet/tensor.hpp"

namespace gunet {

namespace detail {

class HeaderReader {
 public:
  HeaderReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string token(bool allow_comments) {
    skip_space(allow_comments);
    std::string tok;
    while (true) {
      const int ch = in_.peek();
      if (ch == EOF || std::isspace(ch)) break;
      tok.push_back(static_cast<char>(in_.get()));
    }
    if (tok.empty()) fail("truncated header");
    return tok;
  }

  long long integer(bool allow_comments) {
    const std::string tok = token(allow_comments);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception&) {
      fail("expected an integer, found '" + tok + "'");
    }
    if (used != tok.size()) fail("expected an integer, found '" + tok + "'");
    return v;
  }

  // The single whitespace byte separating the header from the payload.
  void end_of_header() {
    const int ch = in_.get();
    if (ch == EOF || !std::isspace(ch)) fail("missing whitespace after header");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError(path_ + ": malformed image header: " + why);
  }

 private:
  void skip_space(bool allow_comments) {
    while (true) {
      const int ch = in_.peek();
      if (ch == EOF) return;
      if (std::isspace(ch)) {
        in_.get();
      } else if (allow_comments && ch == '#') {
        std::string line;
        std::getline(in_, line);
      } else {
        return;
      }
    }
  }

  std::istream& in_;
  std::string path_;
};

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace detail

/// Reads P5/P6 (maxval 255 only) or PF/Pf.
inline Tensor load_image(const std::filesystem::path& path) {
  std::ifstream in = detail::open_in(path);
  detail::HeaderReader hdr(in, path.string());
  const std::string magic = hdr.token(false);

  if (magic == "P5" || magic == "P6") {
    const long long w = hdr.integer(true), h = hdr.integer(true), maxval = hdr.integer(true);
    if (w <= 0 || h <= 0) hdr.fail("non-positive dimensions");
    if (maxval != 255) {
      throw DataError(path.string() + ": maxval " + std::to_string(maxval) +
                      " is unsupported (only 8-bit, maxval 255)");
    }
    hdr.end_of_header();
    const std::size_t c = magic == "P6" ? 3 : 1;
    const auto H = static_cast<std::size_t>(h), W = static_cast<std::size_t>(w);
    std::vector<unsigned char> buf(H * W * c);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
      throw DataError(path.string() + ": truncated payload (expected " + std::to_string(buf.size()) +
                      " bytes, got " + std::to_string(in.gcount()) + ")");
    }
    Tensor t(1, c, H, W);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) t.at(0, ch, y, x) = buf[(y * W + x) * c + ch] / 255.0;
    return t;
  }

  if (magic == "PF" || magic == "Pf") {
    const long long w = hdr.integer(false), h = hdr.integer(false);
    if (w <= 0 || h <= 0) hdr.fail("non-positive dimensions");
    const std::string scale_tok = hdr.token(false);
    double scale = 0;
    try {
      scale = std::stod(scale_tok);
    } catch (const std::exception&) {
      hdr.fail("bad scale '" + scale_tok + "'");
    }
    if (scale == 0.0) hdr.fail("scale must be non-zero");
    hdr.end_of_header();
    const bool little = scale < 0;
    const std::size_t c = magic == "PF" ? 3 : 1;
    const auto H = static_cast<std::size_t>(h), W = static_cast<std::size_t>(w);
    std::vector<std::uint32_t> raw(H * W * c);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (static_cast<std::size_t>(in.gcount()) != raw.size() * 4) {
      throw DataError(path.string() + ": truncated payload (expected " +
                      std::to_string(raw.size() * 4) + " bytes, got " + std::to_string(in.gcount()) + ")");
    }
    const bool native_little = std::endian::native == std::endian::little;
    Tensor t(1, c, H, W);
    for (std::size_t row = 0; row < H; ++row) {
      const std::size_t y = H - 1 - row;  // PFM scanlines run bottom to top
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::uint32_t bits = raw[(row * W + x) * c + ch];
          if (little != native_little) bits = __builtin_bswap32(bits);
          t.at(0, ch, y, x) = static_cast<double>(std::bit_cast<float>(bits));
        }
    }
    return t;
  }

  throw DataError(path.string() + ": unrecognised image format '" + magic +
                  "' (expected P5, P6, PF or Pf)");
}

/// Writes an 8-bit P5 (one channel) or P6 (three channels); values are clamped
/// to [0, 1] and rounded.
inline void save_pnm(const Tensor& t, const std::filesystem::path& path, std::size_t n = 0) {
  if (t.c() != 1 && t.c() != 3) throw DataError("save_pnm: expected 1 or 3 channels, got " + t.shape().str());
  std::ofstream out = detail::open_out(path);
  out << (t.c() == 3 ? "P6" : "P5") << "\n" << t.w() << " " << t.h() << "\n255\n";
  std::vector<unsigned char> buf(t.h() * t.w() * t.c());
  for (std::size_t y = 0; y < t.h(); ++y)
    for (std::size_t x = 0; x < t.w(); ++x)
      for (std::size_t ch = 0; ch < t.c(); ++ch) {
        const double v = std::clamp(t.at(n, ch, y, x), 0.0, 1.0);
        buf[(y * t.w() + x) * t.c() + ch] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

/// Writes a little-endian PFM ("Pf" for one channel, "PF" for three).
inline void save_pfm(const Tensor& t, const std::filesystem::path& path, std::size_t n = 0) {
  if (t.c() != 1 && t.c() != 3) throw DataError("save_pfm: expected 1 or 3 channels, got " + t.shape().str());
  std::ofstream out = detail::open_out(path);
  out << (t.c() == 3 ? "PF" : "Pf") << "\n" << t.w() << " " << t.h() << "\n-1.0\n";
  std::vector<std::uint32_t> raw(t.h() * t.w() * t.c());
  const bool native_little = std::endian::native == std::endian::little;
  for (std::size_t row = 0; row < t.h(); ++row) {
    const std::size_t y = t.h() - 1 - row;
    for (std::size_t x = 0; x < t.w(); ++x)
      for (std::size_t ch = 0; ch < t.c(); ++ch) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(t.at(n, ch, y, x)));
        if (!native_little) bits = __builtin_bswap32(bits);
        raw[(row * t.w() + x) * t.c() + ch] = bits;
      }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
}

inline void save_pfm(const Plane& p, const std::filesystem::path& path) {
  save_pfm(Tensor(Shape{1, 1, p.h, p.w}, p.values), path);
}

/// Dispatches on extension: .pfm is float, .ppm/.pgm are 8-bit.
inline void save_image(const Tensor& t, const std::filesystem::path& path, std::size_t n = 0) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") return save_pfm(t, path, n);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return save_pnm(t, path, n);
  throw DataError("save_image: unsupported extension '" + ext + "' (use .ppm, .pgm or .pfm)");
}

}  // namespace gunet
