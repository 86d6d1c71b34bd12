// File formats.
//
// Cube (.hsc): "HSC1", then uint32 LE L, W, H, then L*W*H float64 LE values,
// bands contiguous within a pixel, pixels row-major. Payload is exactly
// 8*L*W*H bytes after the 16-byte header.
//
// CSV: no header, decimal reals printed with 17 significant digits so that
// doubles round-trip exactly.
//
// PGM: plain (P2) 8-bit gray maps.
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/mrf.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hsiu {

namespace fs = std::filesystem;

void write_cube(const fs::path& path, const HyperspectralImage& image);
HyperspectralImage read_cube(const fs::path& path);

/// Rectangular numeric CSV. Throws IoError when the file is missing and
/// InvalidInput when a row is ragged or a cell is not a number.
Matrix read_csv_matrix(const fs::path& path);
void write_csv_matrix(const fs::path& path, const Matrix& m);

/// One value per line.
Vector read_csv_vector(const fs::path& path);
void write_csv_vector(const fs::path& path, const Vector& v);

/// L rows x R columns.
EndmemberMatrix read_endmembers_csv(const fs::path& path);

/// H rows x W columns of integer labels.
LabelField read_labels_csv(const fs::path& path, int classes);
void write_labels_csv(const fs::path& path, const LabelField& z);

struct GrayImage {
  Index width = 0;
  Index height = 0;
  int max_value = 255;
  std::vector<int> pixels;  // row-major
};

void write_pgm(const fs::path& path, const GrayImage& img);
GrayImage read_pgm(const fs::path& path);

/// Class k -> round(255 k / (K - 1)).
GrayImage render_labels(const LabelField& z);

/// Values mapped linearly from [0, 1] to [0, 255] (clamped); white is large.
GrayImage render_abundance(const Vector& values, Index width, Index height);

}  // namespace hsiu
