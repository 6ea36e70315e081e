#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace proxci {

/// A parsed delimited table: header row plus string cells, rectangular.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return header.size(); }

  /// Index of a named column; throws ValidationError if absent.
  std::size_t column(const std::string& name) const;
};

/// RFC-4180 parser: quoted fields, embedded separators/newlines, "" escapes.
/// A header row is required; every record must match its width.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Locale-independent numeric parse of one cell; context goes into the error.
double parse_cell(const std::string& cell, const std::string& column, std::size_t row);

}  // namespace proxci
