#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "apdm/common.hpp"

namespace apdm {

// Append-only record of a training or evaluation stage: named scalar columns,
// checkpoint paths and any metric reports produced along the way.
struct ExperimentTrace {
  std::string stage;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> checkpoints;
  nlohmann::json metrics = nlohmann::json::array();

  void set_columns(std::vector<std::string> cols) { columns = std::move(cols); }
  void add_row(std::vector<double> row);
  void write_csv(const std::filesystem::path& path) const;
};

// Parses a CSV written by write_csv (header + shortest round-trip doubles).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::size_t column_index(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace apdm
