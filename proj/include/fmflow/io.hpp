#pragma once

// Plain-text persistence: CSV matrices, atomic file writes, content hashes.

#include "fmflow/common.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fmflow::io {

// Writes `content` to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// 16 hex digits of FNV-1a 64.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

// One row per sample; the header line names columns x0..x{D-1}.
std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header = {});
// Accepts an optional non-numeric header line. All rows must have the same
// number of columns. An empty or header-only file yields a 0 x 0 matrix.
Eigen::MatrixXd matrix_from_csv(std::string_view text);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});

// Shortest text that reads back as the same double.
std::string format_double(double v);

// Relative paths resolve against $FMFLOW_OUTPUT_ROOT when it is set.
std::filesystem::path output_path(const std::filesystem::path& p);

}  // namespace fmflow::io
