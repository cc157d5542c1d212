#include "lsnm/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lsnm/errors.hpp"

namespace lsnm::csv {

int Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

int Table::require(std::string_view name, std::string_view context) const {
  const int c = column(name);
  if (c < 0) throw SchemaError(std::string(context) + ": missing required column '" + std::string(name) + "'");
  return c;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    const auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    out.emplace_back(trim(field));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

Table parse(std::istream& in, std::string_view context) {
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (view.empty()) continue;
    auto fields = split(view);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw SchemaError(std::string(context) + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  if (!have_header) throw SchemaError(std::string(context) + ": empty file (header required)");
  return t;
}

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return parse(in, path);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

bool is_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return false;
  if (s == "nan" || s == "inf" || s == "-inf") return true;
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

double parse_double(std::string_view s, std::string_view context) {
  s = trim(s);
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SchemaError(std::string(context) + ": '" + std::string(s) + "' is not a number");
  return v;
}

long long parse_int(std::string_view s, std::string_view context) {
  s = trim(s);
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw SchemaError(std::string(context) + ": '" + std::string(s) + "' is not an integer");
  return v;
}

struct Writer::Impl {
  std::ofstream out;
};

Writer::Writer(const std::string& path) : impl_(std::make_unique<Impl>()) {
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw SchemaError("cannot write '" + path + "'");
}

Writer::~Writer() = default;

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) impl_->out << ',';
    impl_->out << fields[i];
  }
  impl_->out << '\n';
}

}  // namespace lsnm::csv
