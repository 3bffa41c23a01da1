#include "apdm/trace.hpp"

#include <fstream>
#include <sstream>

namespace apdm {

void ExperimentTrace::add_row(std::vector<double> row) {
  if (row.size() != columns.size())
    throw UsageError("trace: row width does not match column count");
  rows.push_back(std::move(row));
}

void ExperimentTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("trace: cannot open '" + path.string() + "'");
  for (std::size_t i = 0; i < columns.size(); ++i)
    out << (i ? "," : "") << columns[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw UsageError("csv: no column named '" + name + "'");
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("csv: cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("csv: missing header in '" + path.string() + "'");
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != table.columns.size())
      throw FormatError("csv: ragged row in '" + path.string() + "'");
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace apdm
