#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "motifnet/linalg.hpp"

namespace motif {

/// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Rows of vectors keyed by a string (motif token or song id).
struct KeyedVectors {
  std::vector<std::string> keys;
  RowMatrixXd vectors;

  std::size_t size() const noexcept { return keys.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
  std::optional<std::size_t> find(std::string_view key) const;
};

/// Text format: first line "N d", then "key v_1 ... v_d" per row.
std::string write_keyed_vectors(const KeyedVectors& kv);
KeyedVectors read_keyed_vectors(std::string_view text);

/// Whitespace-separated matrix block: "rows cols" header then one row per line.
void write_matrix(std::ostream& out, const MatrixXd& m);
MatrixXd read_matrix(std::istream& in);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace motif
