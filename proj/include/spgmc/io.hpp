#ifndef SPGMC_IO_HPP
#define SPGMC_IO_HPP

// Text and image codecs: matrix CSV, observation triplets, PGM, trace CSV.
// Reals are written in the shortest form that parses back to the same
// double, so every CSV round trip is bit-exact.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "spgmc/linalg.hpp"
#include "spgmc/smoothing_loss.hpp"
#include "spgmc/spg_solver.hpp"

namespace spgmc {

/// Malformed file contents.
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The file system refused a read or write.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_real: conversion failed");
  return std::string(buf, end);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    out.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  // Trailing blank lines carry no data.
  while (!out.empty() && trim(out.back()).empty()) out.pop_back();
  return out;
}

inline std::string where(std::size_t line) { return "line " + std::to_string(line + 1) + ": "; }

}  // namespace detail

inline double parse_real(std::string_view token, const std::string& context) {
  double v = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (token.empty() || ec != std::errc() || ptr != last) {
    throw FormatError(context + "non-numeric token '" + std::string(token) + "'");
  }
  if (!std::isfinite(v)) throw FormatError(context + "non-finite value");
  return v;
}

inline std::size_t parse_index(std::string_view token, const std::string& context) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError(context + "invalid index '" + std::string(token) + "'");
  }
  return v;
}

// ---------------------------------------------------------------- files

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

// ----------------------------------------------------------- matrix CSV

inline std::string matrix_csv_write(const Matrix& x) {
  require_dense(x, "matrix_csv_write");
  std::string out;
  out.reserve(static_cast<std::size_t>(x.size()) * 12);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out += ',';
      out += format_real(x(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_csv_read(std::string_view text) {
  const auto rows = detail::lines(text);
  if (rows.empty()) throw FormatError("matrix csv: no rows");
  std::vector<std::vector<double>> values;
  values.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto tokens = detail::split(rows[r], ',');
    if (!values.empty() && tokens.size() != values.front().size()) {
      throw FormatError("matrix csv: " + detail::where(r) + "ragged row with " +
                        std::to_string(tokens.size()) + " fields, expected " +
                        std::to_string(values.front().size()));
    }
    std::vector<double> row;
    row.reserve(tokens.size());
    for (auto t : tokens) row.push_back(parse_real(t, "matrix csv: " + detail::where(r)));
    values.push_back(std::move(row));
  }
  Matrix x(static_cast<Eigen::Index>(values.size()),
           static_cast<Eigen::Index>(values.front().size()));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      x(i, j) = values[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return x;
}

// ------------------------------------------------------------- mask CSV

inline constexpr std::string_view kMaskHeader = "i,j,value";

inline std::string mask_csv_write(const MaskedData& data) {
  std::string out(kMaskHeader);
  out += '\n';
  for (const auto& e : data.entries()) {
    out += std::to_string(e.i);
    out += ',';
    out += std::to_string(e.j);
    out += ',';
    out += format_real(e.value);
    out += '\n';
  }
  return out;
}

/// The raw triplets, before any shape check.
inline std::vector<Observation> mask_csv_triplets(std::string_view text) {
  const auto ls = detail::lines(text);
  if (ls.empty() || detail::trim(ls.front()) != kMaskHeader) {
    throw FormatError("mask csv: expected header '" + std::string(kMaskHeader) + "'");
  }
  std::vector<Observation> obs;
  obs.reserve(ls.size() - 1);
  for (std::size_t r = 1; r < ls.size(); ++r) {
    const std::string ctx = "mask csv: " + detail::where(r);
    const auto tokens = detail::split(ls[r], ',');
    if (tokens.size() != 3) throw FormatError(ctx + "expected 3 fields");
    obs.push_back({parse_index(tokens[0], ctx), parse_index(tokens[1], ctx),
                   parse_real(tokens[2], ctx)});
  }
  if (obs.empty()) throw FormatError("mask csv: no observed entries");
  return obs;
}

/// Zero-based triplets for a rows x cols matrix.
inline MaskedData mask_csv_read(std::string_view text, std::size_t rows, std::size_t cols) {
  std::vector<Observation> obs = mask_csv_triplets(text);
  try {
    return MaskedData(rows, cols, std::move(obs));
  } catch (const ValidationError& e) {
    throw FormatError(std::string("mask csv: ") + e.what());
  }
}

// ------------------------------------------------------------------ PGM

namespace detail {

class PgmCursor {
 public:
  explicit PgmCursor(std::string_view bytes) : s_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
    if (start == pos_) throw FormatError(std::string("pgm: malformed ") + what);
    std::size_t v = 0;
    std::from_chars(s_.data() + start, s_.data() + pos_, v);
    return v;
  }

  std::string_view take(std::size_t n) {
    if (pos_ + n > s_.size()) throw FormatError("pgm: truncated payload");
    auto out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void single_whitespace() {
    if (pos_ >= s_.size()) throw FormatError("pgm: truncated payload");
    const char c = s_[pos_];
    if (c != ' ' && c != '\t' && c != '\r' && c != '\n') {
      throw FormatError("pgm: missing whitespace before raster");
    }
    ++pos_;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// P2 or P5 graymap to a matrix in [0, 1] (pixel / maxval).
inline Matrix pgm_read(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw FormatError("pgm: expected magic P2 or P5");
  }
  const bool binary = bytes[1] == '5';
  detail::PgmCursor cur(bytes.substr(2));
  const std::size_t width = cur.integer("width");
  const std::size_t height = cur.integer("height");
  const std::size_t maxval = cur.integer("maxval");
  if (width == 0 || height == 0) throw FormatError("pgm: zero dimension");
  if (maxval == 0 || maxval > 65535) throw FormatError("pgm: maxval must lie in [1, 65535]");

  Matrix x(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
  const double scale = 1.0 / static_cast<double>(maxval);
  if (binary) {
    cur.single_whitespace();
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    const auto raster = cur.take(width * height * bpp);
    for (std::size_t k = 0; k < width * height; ++k) {
      std::size_t v = static_cast<unsigned char>(raster[k * bpp]);
      if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(raster[k * bpp + 1]);
      if (v > maxval) throw FormatError("pgm: pixel exceeds maxval");
      x(static_cast<Eigen::Index>(k / width), static_cast<Eigen::Index>(k % width)) =
          static_cast<double>(v) * scale;
    }
  } else {
    for (std::size_t k = 0; k < width * height; ++k) {
      std::size_t v = 0;
      try {
        v = cur.integer("pixel");
      } catch (const FormatError&) {
        throw FormatError("pgm: truncated payload");
      }
      if (v > maxval) throw FormatError("pgm: pixel exceeds maxval");
      x(static_cast<Eigen::Index>(k / width), static_cast<Eigen::Index>(k % width)) =
          static_cast<double>(v) * scale;
    }
  }
  return x;
}

/// P5, maxval 255, pixel = round(255 * clamp(x, 0, 1)).
inline std::string pgm_write(const Matrix& x) {
  require_dense(x, "pgm_write");
  std::string out = "P5\n" + std::to_string(x.cols()) + " " + std::to_string(x.rows()) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double v = std::round(255.0 * std::clamp(x(i, j), 0.0, 1.0));
      out += static_cast<char>(static_cast<unsigned char>(v));
    }
  }
  return out;
}

// ------------------------------------------------------------ trace CSV

inline constexpr std::string_view kTraceHeader =
    "k,mu_k,gamma_k,smoothed_objective,energy,exact_objective,step_norm,rank_estimate,mu_reset";

inline std::string trace_csv_write(const std::vector<IterationRecord>& trace) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& r : trace) {
    out += std::to_string(r.k) + ',' + format_real(r.mu_k) + ',' + format_real(r.gamma_k) + ',' +
           format_real(r.smoothed_objective) + ',' + format_real(r.energy) + ',' +
           format_real(r.exact_objective) + ',' + format_real(r.step_norm) + ',' +
           std::to_string(r.rank_estimate) + ',' + (r.mu_reset ? "1" : "0") + '\n';
  }
  return out;
}

inline std::vector<IterationRecord> trace_csv_read(std::string_view text) {
  const auto ls = detail::lines(text);
  if (ls.empty() || detail::trim(ls.front()) != kTraceHeader) {
    throw FormatError("trace csv: unexpected header");
  }
  std::vector<IterationRecord> out;
  for (std::size_t r = 1; r < ls.size(); ++r) {
    const std::string ctx = "trace csv: " + detail::where(r);
    const auto t = detail::split(ls[r], ',');
    if (t.size() != 9) throw FormatError(ctx + "expected 9 fields");
    IterationRecord rec;
    rec.k = parse_index(t[0], ctx);
    rec.mu_k = parse_real(t[1], ctx);
    rec.gamma_k = parse_real(t[2], ctx);
    rec.smoothed_objective = parse_real(t[3], ctx);
    rec.energy = parse_real(t[4], ctx);
    rec.exact_objective = parse_real(t[5], ctx);
    rec.step_norm = parse_real(t[6], ctx);
    rec.rank_estimate = parse_index(t[7], ctx);
    if (t[8] != "0" && t[8] != "1") throw FormatError(ctx + "mu_reset must be 0 or 1");
    rec.mu_reset = t[8] == "1";
    out.push_back(rec);
  }
  return out;
}

}  // namespace spgmc

#endif  // SPGMC_IO_HPP
