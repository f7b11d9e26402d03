#pragma once

#include <string>
#include <vector>

namespace mpap::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Minimal CSV: comma separated, no quoting (all emitted values are plain
// numbers or identifiers), empty cell = empty string.
Table read_file(const std::string& path);
void write_file(const std::string& path, const Table& table);

std::vector<std::string> split_line(const std::string& line);

}  // namespace mpap::csv
