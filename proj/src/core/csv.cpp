#include "csv.hpp"

#include <fstream>
#include <sstream>

#include "error.hpp"

namespace mpap::csv {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto row = split_line(line);
    if (row.size() != t.header.size()) {
      throw DataError(path + ": row " + std::to_string(t.rows.size() + 1) + " has " +
                      std::to_string(row.size()) + " cells, expected " +
                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_file(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  auto emit = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace mpap::csv
