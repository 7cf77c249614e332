// __BEGIN_LICENSE__
//  Copyright (c) 2026, the satstereo authors.
//
//  Licensed under the Apache License, Version 2.0 (the "License"); you may
//  not use this file except in compliance with the License. You may obtain a
//  copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.
// __END_LICENSE__

#include "satstereo/io/pnm.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace satstereo::io {
namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw FormatError("unexpected end of header");
  return tok;
}

std::size_t parse_extent(const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos != tok.size() || v <= 0) throw FormatError(std::string("bad ") + what);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw FormatError(std::string("bad ") + what + ": '" + tok + "'");
  }
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw FormatError("cannot open " + p.string());
  return f;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot create " + p.string());
  return f;
}

}  // namespace

Raster<std::uint16_t> read_pgm(std::istream& in) {
  if (next_token(in) != "P5") throw FormatError("not a binary PGM (P5)");
  const std::size_t w = parse_extent(next_token(in), "width");
  const std::size_t h = parse_extent(next_token(in), "height");
  const std::size_t maxval = parse_extent(next_token(in), "maxval");
  if (maxval > 65535) throw FormatError("PGM maxval above 65535");
  Raster<std::uint16_t> img(h, w);
  if (maxval < 256) {
    std::vector<unsigned char> buf(w * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw FormatError("truncated PGM");
    std::copy(buf.begin(), buf.end(), img.data().begin());
  } else {
    std::vector<unsigned char> buf(2 * w * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw FormatError("truncated PGM");
    for (std::size_t i = 0; i < w * h; ++i) {
      img.data()[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
  }
  return img;
}

Raster<std::uint16_t> read_pgm(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_pgm(f);
}

void write_pgm16(std::ostream& out, const Raster<std::uint16_t>& img) {
  out << "P5\n" << img.cols() << ' ' << img.rows() << "\n65535\n";
  std::vector<unsigned char> buf(2 * img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[2 * i] = static_cast<unsigned char>(img.data()[i] >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(img.data()[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_pgm16(const std::filesystem::path& path, const Raster<std::uint16_t>& img) {
  auto f = open_out(path);
  write_pgm16(f, img);
}

void write_mask_pgm(std::ostream& out, const Mask& mask) {
  out << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n255\n";
  std::vector<unsigned char> buf(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) buf[i] = mask.data()[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_mask_pgm(const std::filesystem::path& path, const Mask& mask) {
  auto f = open_out(path);
  write_mask_pgm(f, mask);
}

Mask read_mask_pgm(const std::filesystem::path& path) {
  const auto raw = read_pgm(path);
  Mask m(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.size(); ++i) m.data()[i] = raw.data()[i] ? 1 : 0;
  return m;
}

ImageF read_pfm(std::istream& in) {
  const std::string magic = next_token(in);
  if (magic != "Pf") throw FormatError("not a greyscale PFM (Pf), got '" + magic + "'");
  const std::size_t w = parse_extent(next_token(in), "width");
  const std::size_t h = parse_extent(next_token(in), "height");
  const std::string scale_tok = next_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::logic_error&) {
    throw FormatError("bad PFM scale '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be nonzero");
  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;

  std::vector<std::uint32_t> raw(w * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * 4)) throw FormatError("truncated PFM");

  ImageF img(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t src_row = h - 1 - r;
    for (std::size_t c = 0; c < w; ++c) {
      std::uint32_t bits = raw[src_row * w + c];
      if (file_little != host_little) bits = __builtin_bswap32(bits);
      img(r, c) = std::bit_cast<float>(bits);
    }
  }
  return img;
}

ImageF read_pfm(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_pfm(f);
}

void write_pfm(std::ostream& out, const ImageF& img) {
  out << "Pf\n" << img.cols() << ' ' << img.rows() << "\n-1.0\n";
  std::vector<std::uint32_t> raw(img.size());
  const bool host_little = std::endian::native == std::endian::little;
  for (std::size_t r = 0; r < img.rows(); ++r) {
    const std::size_t dst_row = img.rows() - 1 - r;
    for (std::size_t c = 0; c < img.cols(); ++c) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(img(r, c));
      if (!host_little) bits = __builtin_bswap32(bits);
      raw[dst_row * img.cols() + c] = bits;
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
}

void write_pfm(const std::filesystem::path& path, const ImageF& img) {
  auto f = open_out(path);
  write_pfm(f, img);
}

ImageF to_float(const Raster<std::uint16_t>& img) {
  ImageF out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = static_cast<float>(img.data()[i]) / 65535.0f;
  return out;
}

Raster<std::uint16_t> to_u16(const ImageF& img) {
  Raster<std::uint16_t> out(img.rows(), img.cols());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.data()[i], 0.0f, 1.0f);
    out.data()[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
  }
  return out;
}

}  // namespace satstereo::io
