#pragma once

#include <string>
#include <vector>

namespace malab {

enum class ReportFormat { Csv, Json };

/// Csv for `.csv`, Json for `.json`; throws ConfigError otherwise.
ReportFormat report_format_for(const std::string& path);

/// Per-k rows of named numeric columns, ordered by k.
struct ConvergenceReport {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Throws MismatchError for an unknown column.
  std::size_t index_of(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  bool operator==(const ConvergenceReport&) const = default;
};

/// CSV: header of column names then one line per row. JSON: array of row
/// objects with the same keys in column order. Floats round-trip exactly.
void emit_report(const ConvergenceReport& r, const std::string& path, ReportFormat format);
std::string report_to_string(const ConvergenceReport& r, ReportFormat format);
ConvergenceReport read_report(const std::string& path, ReportFormat format);
ConvergenceReport parse_report(const std::string& text, ReportFormat format);

}  // namespace malab
