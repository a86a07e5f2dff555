#include "fmflow/io.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fmflow::io {

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string content_hash(std::string_view bytes) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
  return ss.str();
}

std::string file_hash(const std::filesystem::path& path) { return content_hash(read_file(path)); }

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  } else {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += (c ? ",x" : "x") + std::to_string(c);
  }
  out += '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

namespace {

bool parse_row(std::string_view line, std::vector<double>& row) {
  row.clear();
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto end = std::min(line.find(',', pos), line.size());
    auto field = line.substr(pos, end - pos);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size()) return false;
    row.push_back(v);
    pos = end + 1;
  }
  return true;
}

}  // namespace

Eigen::MatrixXd matrix_from_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::size_t pos = 0;
  bool first = true;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!parse_row(line, row)) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("CSV line " + std::to_string(line_no) + " is not numeric");
    }
    first = false;
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError("CSV line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                        " columns, expected " + std::to_string(rows.front().size()));
    rows.push_back(row);
  }
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  try {
    return matrix_from_csv(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  atomic_write(path, matrix_to_csv(m, header));
}

std::filesystem::path output_path(const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("FMFLOW_OUTPUT_ROOT"); root != nullptr && *root != '\0')
    return std::filesystem::path(root) / p;
  return p;
}

}  // namespace fmflow::io
