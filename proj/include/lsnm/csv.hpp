#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace lsnm::csv {

/// A header-indexed table of string cells. No quoting: fields never contain commas.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name, or -1.
  int column(std::string_view name) const;
  /// Column index by name; throws SchemaError naming the column when absent.
  int require(std::string_view name, std::string_view context) const;
};

Table read(const std::string& path);
Table parse(std::istream& in, std::string_view context);

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

/// Shortest representation that round-trips a double exactly.
std::string format_double(double x);
double parse_double(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);
/// True when `s` parses completely as a finite or infinite double.
bool is_number(std::string_view s);

class Writer {
 public:
  explicit Writer(const std::string& path);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<std::string>& fields);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lsnm::csv
