#include "hsiu/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hsiu {

namespace {

constexpr std::array<char, 4> kCubeMagic{'H', 'S', 'C', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xffU);
  os.write(b.data(), 4);
}

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  os.write(b.data(), 8);
}

std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

double parse_cell(std::string_view cell, const fs::path& path, std::size_t row) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw InvalidInput(path.string() + ": non-numeric cell '" + std::string(cell) + "' on line " +
                       std::to_string(row + 1));
  }
  return v;
}

std::vector<std::vector<double>> read_rows(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto end = comma == std::string::npos ? line.size() : comma;
      row.push_back(parse_cell(std::string_view(line).substr(start, end - start), path, rows.size()));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidInput(path.string() + ": line " + std::to_string(rows.size() + 1) + " has " +
                         std::to_string(row.size()) + " columns, expected " +
                         std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInput(path.string() + ": empty CSV file");
  return rows;
}

}  // namespace

void write_cube(const fs::path& path, const HyperspectralImage& image) {
  auto out = open_out(path, std::ios::binary);
  out.write(kCubeMagic.data(), 4);
  put_u32(out, static_cast<std::uint32_t>(image.bands()));
  put_u32(out, static_cast<std::uint32_t>(image.width()));
  put_u32(out, static_cast<std::uint32_t>(image.height()));
  const Matrix& d = image.data();
  for (Index n = 0; n < d.cols(); ++n) {
    for (Index l = 0; l < d.rows(); ++l) put_f64(out, d(l, n));
  }
  if (!out) throw IoError("write failed: " + path.string());
}

HyperspectralImage read_cube(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCubeMagic.data(), 4) != 0) {
    throw InvalidInput(path.string() + ": not an HSC1 cube");
  }
  const auto bands = static_cast<Index>(get_le(bytes.data() + 4, 4));
  const auto width = static_cast<Index>(get_le(bytes.data() + 8, 4));
  const auto height = static_cast<Index>(get_le(bytes.data() + 12, 4));
  const std::uint64_t expected = 8ULL * static_cast<std::uint64_t>(bands) *
                                 static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height);
  if (bytes.size() - 16 != expected) {
    throw InvalidInput(path.string() + ": payload is " + std::to_string(bytes.size() - 16) +
                       " bytes, header implies " + std::to_string(expected));
  }
  Matrix d(bands, width * height);
  const unsigned char* p = bytes.data() + 16;
  for (Index n = 0; n < d.cols(); ++n) {
    for (Index l = 0; l < bands; ++l, p += 8) d(l, n) = std::bit_cast<double>(get_le(p, 8));
  }
  return HyperspectralImage(width, height, std::move(d));
}

Matrix read_csv_matrix(const fs::path& path) {
  const auto rows = read_rows(path);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_csv_matrix(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  out << std::setprecision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Vector read_csv_vector(const fs::path& path) {
  const Matrix m = read_csv_matrix(path);
  if (m.cols() != 1 && m.rows() != 1) throw InvalidInput(path.string() + ": expected a single column");
  return m.cols() == 1 ? Vector(m.col(0)) : Vector(m.row(0).transpose());
}

void write_csv_vector(const fs::path& path, const Vector& v) { write_csv_matrix(path, v); }

EndmemberMatrix read_endmembers_csv(const fs::path& path) {
  return EndmemberMatrix(read_csv_matrix(path));
}

LabelField read_labels_csv(const fs::path& path, int classes) {
  const Matrix m = read_csv_matrix(path);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (v != std::floor(v)) throw InvalidInput(path.string() + ": non-integer label");
      labels.push_back(static_cast<int>(v));
    }
  }
  return LabelField(m.cols(), m.rows(), classes, std::move(labels));
}

void write_labels_csv(const fs::path& path, const LabelField& z) {
  auto out = open_out(path);
  for (Index r = 0; r < z.height(); ++r) {
    for (Index c = 0; c < z.width(); ++c) {
      if (c > 0) out << ',';
      out << z[r * z.width() + c];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_pgm(const fs::path& path, const GrayImage& img) {
  auto out = open_out(path);
  out << "P2\n" << img.width << ' ' << img.height << '\n' << img.max_value << '\n';
  for (Index r = 0; r < img.height; ++r) {
    for (Index c = 0; c < img.width; ++c) {
      if (c > 0) out << ' ';
      out << img.pixels[static_cast<std::size_t>(r * img.width + c)];
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

GrayImage read_pgm(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream buf;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    buf << line << '\n';
  }
  std::istringstream tokens(buf.str());
  std::string magic;
  GrayImage img;
  if (!(tokens >> magic >> img.width >> img.height >> img.max_value) || magic != "P2") {
    throw InvalidInput(path.string() + ": not a plain PGM (P2) file");
  }
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height));
  for (int& p : img.pixels) {
    if (!(tokens >> p)) throw InvalidInput(path.string() + ": truncated PGM data");
  }
  return img;
}

GrayImage render_labels(const LabelField& z) {
  GrayImage img{z.width(), z.height(), 255, {}};
  const int denom = std::max(1, z.classes() - 1);
  img.pixels.reserve(static_cast<std::size_t>(z.size()));
  for (int k : z.labels()) img.pixels.push_back(static_cast<int>(std::lround(255.0 * k / denom)));
  return img;
}

GrayImage render_abundance(const Vector& values, Index width, Index height) {
  if (values.size() != width * height) throw DimensionMismatch("abundance map size mismatch");
  GrayImage img{width, height, 255, {}};
  img.pixels.reserve(static_cast<std::size_t>(values.size()));
  for (Index n = 0; n < values.size(); ++n) {
    img.pixels.push_back(static_cast<int>(std::lround(255.0 * std::clamp(values(n), 0.0, 1.0))));
  }
  return img;
}

}  // namespace hsiu
