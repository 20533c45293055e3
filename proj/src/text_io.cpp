#include "motifnet/text_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "motifnet/errors.hpp"

namespace motif {

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("float formatting failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw DataError("invalid number '" + std::string(text) + "'");
  }
  return value;
}

std::optional<std::size_t> KeyedVectors::find(std::string_view key) const {
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i] == key) return i;
  }
  return std::nullopt;
}

std::string write_keyed_vectors(const KeyedVectors& kv) {
  std::string out = std::to_string(kv.size()) + ' ' + std::to_string(kv.dim()) + '\n';
  for (std::size_t i = 0; i < kv.size(); ++i) {
    out += kv.keys[i];
    for (Eigen::Index j = 0; j < kv.vectors.cols(); ++j) {
      out += ' ';
      out += format_double(kv.vectors(static_cast<Eigen::Index>(i), j));
    }
    out += '\n';
  }
  return out;
}

KeyedVectors read_keyed_vectors(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t rows = 0, dim = 0;
  std::string line;
  if (!std::getline(in, line) || !(std::istringstream(line) >> rows >> dim)) {
    throw ParseError(1, "expected header 'N d'");
  }
  KeyedVectors kv;
  kv.keys.reserve(rows);
  kv.vectors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw ParseError(i + 2, "truncated vector file");
    std::istringstream row(line);
    std::string key, field;
    row >> key;
    for (std::size_t j = 0; j < dim; ++j) {
      if (!(row >> field)) throw ParseError(i + 2, "expected " + std::to_string(dim) + " values");
      kv.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = parse_double(field);
    }
    if (row >> field) throw ParseError(i + 2, "too many values");
    kv.keys.push_back(std::move(key));
  }
  return kv;
}

void write_matrix(std::ostream& out, const MatrixXd& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

MatrixXd read_matrix(std::istream& in) {
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw DataError("bad matrix header");
  MatrixXd m(rows, cols);
  std::string field;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> field)) throw DataError("truncated matrix");
      m(i, j) = parse_double(field);
    }
  }
  return m;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
}

}  // namespace motif
