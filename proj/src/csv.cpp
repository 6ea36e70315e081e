#include "proxci/csv.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "proxci/errors.hpp"

namespace proxci {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  throw ValidationError("column \"" + name + "\" not found in table header");
}

namespace {

// Splits the whole stream into records honoring RFC-4180 quoting.
std::vector<std::vector<std::string>> parse_records(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool any_char = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    any_char = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        any_char = true;
        break;
      case ',':
        end_field();
        any_char = true;
        break;
      case '\r':
        break;  // swallowed; \n terminates the record
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        any_char = true;
    }
  }
  if (in_quotes) throw ValidationError("unterminated quoted field at end of input");
  if (any_char || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  auto records = parse_records(in);
  if (records.empty()) throw ValidationError("empty input: a header row is required");
  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != table.header.size()) {
      throw ValidationError("row " + std::to_string(i) + " has " +
                            std::to_string(records[i].size()) + " fields, expected " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[i]));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  return read_csv(in);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out << ',';
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), row[j],
                                   std::chars_format::general, 17);
      out.write(buf, p - buf);
      (void)ec;
    }
    out << '\n';
  }
}

double parse_cell(const std::string& cell, const std::string& column, std::size_t row) {
  const char* first = cell.data();
  const char* last = first + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  double value = 0.0;
  auto [p, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || p != last) {
    throw ValidationError("column \"" + column + "\", row " + std::to_string(row) +
                          ": cannot parse \"" + cell + "\" as a number");
  }
  return value;
}

}  // namespace proxci
