#include "malab/report.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "malab/errors.hpp"
#include "malab/io.hpp"

namespace malab {

ReportFormat report_format_for(const std::string& path) {
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".csv")) return ReportFormat::Csv;
  if (ends_with(".json")) return ReportFormat::Json;
  throw ConfigError("report path '" + path + "' must end in .csv or .json");
}

std::size_t ConvergenceReport::index_of(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return c;
  throw MismatchError("report has no column '" + name + "'");
}

std::vector<double> ConvergenceReport::column(const std::string& name) const {
  const std::size_t c = index_of(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

std::string report_to_string(const ConvergenceReport& r, ReportFormat format) {
  for (const auto& row : r.rows)
    if (row.size() != r.columns.size()) throw MismatchError("report row width differs from the header");
  if (format == ReportFormat::Json) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
      nlohmann::ordered_json obj = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < r.columns.size(); ++c) obj[r.columns[c]] = row[c];
      arr.push_back(std::move(obj));
    }
    return arr.dump(1) + "\n";
  }
  std::string out;
  for (std::size_t c = 0; c < r.columns.size(); ++c) out += (c ? "," : "") + r.columns[c];
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_double(row[c]);
    out += '\n';
  }
  return out;
}

void emit_report(const ConvergenceReport& r, const std::string& path, ReportFormat format) {
  const std::string text = report_to_string(r, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

ConvergenceReport parse_report(const std::string& text, ReportFormat format) {
  ConvergenceReport r;
  if (format == ReportFormat::Json) {
    nlohmann::ordered_json arr;
    try {
      arr = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed report JSON: ") + e.what());
    }
    if (!arr.is_array()) throw IoError("report JSON must be an array of row objects");
    for (const auto& obj : arr) {
      if (!obj.is_object()) throw IoError("report JSON rows must be objects");
      if (r.columns.empty())
        for (const auto& [key, value] : obj.items()) r.columns.push_back(key);
      std::vector<double> row;
      std::size_t c = 0;
      for (const auto& [key, value] : obj.items()) {
        if (c >= r.columns.size() || key != r.columns[c] || !value.is_number())
          throw IoError("report JSON rows must share numeric keys in the same order");
        row.push_back(value.get<double>());
        ++c;
      }
      if (row.size() != r.columns.size()) throw IoError("report JSON row has missing keys");
      r.rows.push_back(std::move(row));
    }
    return r;
  }
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("report CSV is empty");
  for (auto& name : split_csv_line(line)) r.columns.push_back(name);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cols = split_csv_line(line);
    if (cols.size() != r.columns.size())
      throw IoError("report CSV line " + std::to_string(lineno) + ": expected " + std::to_string(r.columns.size()) +
                    " columns");
    std::vector<double> row;
    for (const auto& c : cols) row.push_back(parse_double(c));
    r.rows.push_back(std::move(row));
  }
  return r;
}

ConvergenceReport read_report(const std::string& path, ReportFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_report(ss.str(), format);
  } catch (const IoError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

}  // namespace malab
