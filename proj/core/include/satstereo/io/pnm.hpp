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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "satstereo/common/raster.hpp"

namespace satstereo::io {

// Binary PGM (P5). Samples wider than 8 bits are big-endian per the netpbm
// format; 8-bit files are widened on read.
Raster<std::uint16_t> read_pgm(std::istream& in);
Raster<std::uint16_t> read_pgm(const std::filesystem::path& path);
void write_pgm16(std::ostream& out, const Raster<std::uint16_t>& img);
void write_pgm16(const std::filesystem::path& path, const Raster<std::uint16_t>& img);
/// 8-bit PGM, used for validity masks (0 / 255).
void write_mask_pgm(std::ostream& out, const Mask& mask);
void write_mask_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_mask_pgm(const std::filesystem::path& path);

// Greyscale PFM ("Pf"). Rows are stored bottom-to-top; a negative scale
// marks little-endian payload. Writers always emit scale -1.0.
ImageF read_pfm(std::istream& in);
ImageF read_pfm(const std::filesystem::path& path);
void write_pfm(std::ostream& out, const ImageF& img);
void write_pfm(const std::filesystem::path& path, const ImageF& img);

/// Linear rescale of 16-bit samples into [0, 1].
ImageF to_float(const Raster<std::uint16_t>& img);
/// Clamp-and-round of [0, 1] floats into 16-bit samples.
Raster<std::uint16_t> to_u16(const ImageF& img);

}  // namespace satstereo::io
