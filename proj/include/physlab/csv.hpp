#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Tiny deterministic CSV writer: UTF-8, comma separated, header row, LF line
// endings, doubles at 17 significant digits so files round-trip bit-exactly.
namespace physlab::csv {

std::string fmt(double v);
std::string fmt(std::int64_t v);
std::string fmt(int v);
std::string fmt(std::uint64_t v);

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);

  std::size_t rows() const { return rows_.size(); }
  std::string to_string() const;

  /// Writes the table; throws std::runtime_error on I/O failure.
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace physlab::csv
