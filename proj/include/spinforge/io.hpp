#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spinforge {

/// Input/output failure (unreadable or unwritable file).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data that does not match the expected layout.
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numeric table with '#'-prefixed metadata lines above the column header.
struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of a column; -1 when absent.
  int column(const std::string& name) const;
  std::vector<double> values(const std::string& name) const;
};

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

std::string to_csv(const CsvTable& table);

/// Throws SchemaError on ragged rows, non-numeric cells or a missing header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

std::string read_file(const std::string& path);

/// Writes to a sibling temporary file and renames it over `path`, so the
/// file appears complete or not at all.
void write_file_atomic(const std::string& path, const std::string& content);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

/// Converts "50mT", "9.7GHz", "2us" or a bare number into `unit`.
/// Supported families: tesla (T, mT, uT, G), hertz (Hz, kHz, MHz, GHz),
/// seconds (s, ms, us, ns) and angles (deg, rad).  Throws std::invalid_argument.
double parse_quantity(const std::string& text, const std::string& unit);

struct Range {
  double start = 0.0;
  double stop = 0.0;
  int n = 0;

  std::vector<double> values() const;
};

/// "start:stop[unit]:n", e.g. "0:50mT:501" or "-20GHz:80GHz:2001".  A unit on
/// the stop value applies to a bare start value.  Values are returned in `unit`.
Range parse_range(const std::string& text, const std::string& unit);

}  // namespace spinforge
