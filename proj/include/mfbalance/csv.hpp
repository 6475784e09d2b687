#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mfbalance {

// Shortest decimal text that round-trips to the same double ('.' separator).
std::string format_number(double value);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // source line of each row, 1-based

  // Index of a header column; throws ParseError naming the column when absent.
  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const;

  std::string source;
};

// Reads a comma-separated table with a header row. Blank lines are skipped.
// Rows whose field count differs from the header raise ParseError.
CsvTable read_csv(std::istream& in, const std::string& source);
CsvTable read_csv_file(const std::string& path);

std::vector<std::string> split_fields(std::string_view line);

}  // namespace mfbalance
