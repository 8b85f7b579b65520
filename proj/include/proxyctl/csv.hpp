#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace proxyctl {

// Comma-separated, header row required, '.' decimal, no quoting or locale
// handling. Values round-trip exactly via %.17g.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // rows x header.size()

  Eigen::Index column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

// Raw rows (header included), no numeric conversion; for tables that mix
// strings and numbers, like the benchmark summary.
std::vector<std::vector<std::string>> parse_csv_rows(const std::string& text);

std::string format_csv(const CsvTable& table);

// Write-temp-then-rename so partially written files never appear.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace proxyctl
