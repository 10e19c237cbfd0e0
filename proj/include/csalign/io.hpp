#pragma once

// File formats used by the command-line tool:
//   * embedding CSV (optional header, optional trailing integer label column)
//   * EMB1 binary: "EMB1", u32 n, u32 d, u32 reserved, then n*d little-endian f64, row-major
//   * PMF vector: one CSV line of non-negative floats
//   * config: flat key=value lines, '#' starts a comment
//   * JSON reports with every float written as %.17g

#include <Eigen/Dense>
#include <json.hpp>

#include <bit>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "csalign/error.hpp"
#include "csalign/pmf.hpp"

namespace csalign::io {

using ordered_json = nlohmann::ordered_json;

inline constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kEmbHeaderBytes = 16;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline double to_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  csalign::detail::require(parse_double(s, v), ErrorCode::Parse, where + ": '" + s + "' is not a number");
  return v;
}

inline std::int64_t to_int(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  csalign::detail::require(!s.empty() && pos == s.size(), ErrorCode::Parse,
                           where + ": '" + s + "' is not an integer");
  return v;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  csalign::detail::require(static_cast<bool>(in), ErrorCode::Parse, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

/// Parses embedding CSV text. With `label_col` the last column holds integer
/// labels; otherwise row i gets label i. A non-numeric first line is a header.
inline EmbeddingBatch parse_embedding_csv(const std::string& text, bool label_col, const std::string& name = {}) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  Labels labels;
  std::size_t width = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    auto fields = detail::split(line, ',');
    double probe = 0.0;
    if (rows.empty() && labels.empty() && !detail::parse_double(fields.front(), probe)) continue;  // header
    const std::string where = "line " + std::to_string(line_no);
    csalign::detail::require(!label_col || fields.size() >= 2, ErrorCode::Parse, where + ": missing label column");
    const std::size_t nvals = label_col ? fields.size() - 1 : fields.size();
    csalign::detail::require(width == 0 || nvals == width, ErrorCode::Parse, where + ": ragged row");
    width = nvals;
    std::vector<double> vals;
    for (std::size_t k = 0; k < nvals; ++k) vals.push_back(detail::to_double(fields[k], where));
    if (label_col) labels.push_back(detail::to_int(fields.back(), where));
    rows.push_back(std::move(vals));
  }
  csalign::detail::require(!rows.empty(), ErrorCode::Parse, "no data rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < width; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  if (!label_col) {
    labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = static_cast<std::int64_t>(i);
  }
  return EmbeddingBatch(std::move(m), std::move(labels), name);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_embedding_csv(const EmbeddingBatch& b, bool label_col) {
  std::string out;
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index k = 0; k < b.dim(); ++k) {
      if (k) out += ',';
      out += format_double(b.data()(i, k));
    }
    if (label_col) out += "," + std::to_string(b.labels()[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

inline EmbeddingBatch parse_emb1(const std::string& bytes, const std::string& name = {}) {
  csalign::detail::require(bytes.size() >= kEmbHeaderBytes && std::memcmp(bytes.data(), kEmbMagic, 4) == 0,
                           ErrorCode::Parse, "missing EMB1 header");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t n = detail::get_u32(raw + 4);
  const std::uint32_t d = detail::get_u32(raw + 8);
  const std::size_t expected = kEmbHeaderBytes + static_cast<std::size_t>(n) * d * 8;
  csalign::detail::require(n >= 1 && d >= 1 && bytes.size() == expected, ErrorCode::Parse,
                           "EMB1 payload size does not match header");
  Matrix m(n, d);
  for (std::size_t k = 0; k < static_cast<std::size_t>(n) * d; ++k) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | raw[kEmbHeaderBytes + k * 8 + static_cast<std::size_t>(b)];
    m(static_cast<Eigen::Index>(k / d), static_cast<Eigen::Index>(k % d)) = std::bit_cast<double>(bits);
  }
  Labels labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = i;
  return EmbeddingBatch(std::move(m), std::move(labels), name);
}

inline std::string to_emb1(const Matrix& m) {
  std::ostringstream out(std::ios::binary);
  out.write(kEmbMagic, 4);
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  detail::put_u32(out, 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      auto bits = std::bit_cast<std::uint64_t>(m(i, k));
      for (int b = 0; b < 8; ++b) {
        out.put(static_cast<char>(bits & 0xff));
        bits >>= 8;
      }
    }
  }
  return out.str();
}

/// Loads an embedding file, choosing EMB1 or CSV by content.
inline EmbeddingBatch load_embeddings(const std::string& path, bool label_col, const std::string& name = {}) {
  const std::string bytes = detail::read_text(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kEmbMagic, 4) == 0) return parse_emb1(bytes, name);
  return parse_embedding_csv(bytes, label_col, name);
}

/// Parses one CSV line of floats; range checks are left to the divergence layer.
inline Vector parse_pmf_line(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    csalign::detail::require(vals.empty(), ErrorCode::Parse, "PMF file must hold a single line");
    for (const auto& f : detail::split(line, ',')) vals.push_back(detail::to_double(f, "PMF"));
  }
  csalign::detail::require(!vals.empty(), ErrorCode::Parse, "empty PMF file");
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline Vector load_pmf(const std::string& path) { return parse_pmf_line(detail::read_text(path)); }

/// key=value lines; '#' begins a comment; later keys override earlier ones.
inline std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    csalign::detail::require(eq != std::string::npos && eq > 0, ErrorCode::Parse,
                             "config line " + std::to_string(line_no) + ": expected key=value");
    out[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return out;
}

inline std::map<std::string, std::string> load_config(const std::string& path) {
  return parse_config(detail::read_text(path));
}

/// Serializes JSON with floats at 17 significant digits; non-finite numbers
/// become the strings "Infinity", "-Infinity", "NaN".
inline void dump_json(const ordered_json& j, std::string& out, int indent = 2, int depth = 0) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case ordered_json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + ordered_json(it.key()).dump() + ": ";
        dump_json(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case ordered_json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        if (k) out += ",\n";
        out += pad;
        dump_json(j[k], out, indent, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case ordered_json::value_t::number_float: {
      const double v = j.get<double>();
      if (std::isfinite(v)) {
        out += format_double(v);
      } else {
        out += std::isnan(v) ? "\"NaN\"" : (v > 0 ? "\"Infinity\"" : "\"-Infinity\"");
      }
      return;
    }
    default: out += j.dump(); return;
  }
}

inline std::string dump_json(const ordered_json& j) {
  std::string out;
  dump_json(j, out);
  out += '\n';
  return out;
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  csalign::detail::require(static_cast<bool>(out), ErrorCode::Parse, "cannot write '" + path + "'");
  out << contents;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace csalign::io
