#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "spinforge/constants.hpp"
#include "spinforge/io.hpp"
#include "spinforge/trace.hpp"

namespace spinforge {

namespace {

struct Unit {
  const char* name;
  const char* family;
  double factor;  // to the family's base unit
};

constexpr Unit kUnits[] = {
    {"T", "field", 1.0},          {"mT", "field", 1e-3},        {"uT", "field", 1e-6},
    {"\xC2\xB5T", "field", 1e-6}, {"G", "field", 1e-4},         {"Hz", "frequency", 1.0},
    {"kHz", "frequency", 1e3},    {"MHz", "frequency", 1e6},    {"GHz", "frequency", 1e9},
    {"s", "time", 1.0},           {"ms", "time", 1e-3},         {"us", "time", 1e-6},
    {"\xC2\xB5s", "time", 1e-6},  {"ns", "time", 1e-9},         {"deg", "angle", 1.0},
    {"rad", "angle", 180.0 / constants::pi},
};

const Unit* find_unit(const std::string& name) {
  for (const auto& u : kUnits)
    if (name == u.name) return &u;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits "50mT" into 50 and "mT".
std::pair<double, std::string> split_quantity(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty quantity");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || errno == ERANGE || !std::isfinite(v))
    throw std::invalid_argument("cannot read a number from \"" + text + "\"");
  return {v, trim(std::string(end))};
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return static_cast<int>(k);
  return -1;
}

std::vector<double> CsvTable::values(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw SchemaError("missing column \"" + name + "\"");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (const auto& c : table.comments) out += "# " + c + "\n";
  for (std::size_t k = 0; k < table.columns.size(); ++k) out += (k ? "," : "") + table.columns[k];
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ",";
      out += format_number(row[k]);
    }
    out += "\n";
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      table.comments.push_back(c);
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();

    if (table.columns.empty()) {
      for (const auto& c : cells)
        if (c.empty()) throw SchemaError("empty column name in header");
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size())
      throw SchemaError("line " + std::to_string(lineno) + ": expected " + std::to_string(table.columns.size()) +
                        " cells, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0' || !std::isfinite(v))
        throw SchemaError("line " + std::to_string(lineno) + ": \"" + c + "\" is not a finite number");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw SchemaError("no column header");
  return table;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path)); }

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("error writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename onto " + path + ": " + ec.message());
  }
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double parse_quantity(const std::string& text, const std::string& unit) {
  const auto [v, suffix] = split_quantity(text);
  if (suffix.empty() || suffix == unit) return v;
  const Unit* from = find_unit(suffix);
  const Unit* to = find_unit(unit);
  if (!from) throw std::invalid_argument("unknown unit \"" + suffix + "\" in \"" + text + "\"");
  if (!to || std::string(from->family) != to->family)
    throw std::invalid_argument("\"" + text + "\" is not convertible to " + unit);
  return v * from->factor / to->factor;
}

std::vector<double> Range::values() const { return linspace(start, stop, n); }

Range parse_range(const std::string& text, const std::string& unit) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() != 3) throw std::invalid_argument("range \"" + text + "\" must look like start:stop:n");

  const std::string a_unit = split_quantity(parts[0]).second;
  const std::string b_unit = split_quantity(parts[1]).second;
  const std::string shared = b_unit.empty() ? unit : b_unit;
  Range r;
  r.start = parse_quantity(parts[0] + (a_unit.empty() ? shared : std::string()), unit);
  r.stop = parse_quantity(parts[1], unit);

  char* end = nullptr;
  const std::string count = trim(parts[2]);
  const long n = std::strtol(count.c_str(), &end, 10);
  if (count.empty() || *end != '\0' || n < 1 || n > 10000000)
    throw std::invalid_argument("range \"" + text + "\" needs a positive point count");
  r.n = static_cast<int>(n);
  return r;
}

}  // namespace spinforge
