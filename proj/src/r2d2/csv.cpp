#include "r2d2/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "r2d2/error.hpp"

namespace r2d2::csv {

int Table::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<int>(j);
  return -1;
}

Table read(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  long line = 1, record_line = 1;
  std::vector<long> lines;

  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) {
      records.push_back(std::move(record));
      lines.push_back(record_line);
    }
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          std::ostringstream os;
          os << "line " << line << ": stray quote inside unquoted field";
          fail(ErrorKind::kInput, os.str());
        }
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) {
    std::ostringstream os;
    os << "line " << record_line << ": unterminated quoted field";
    fail(ErrorKind::kInput, os.str());
  }
  if (field_started || !record.empty()) end_record();

  if (records.empty()) fail(ErrorKind::kInput, "empty CSV file");
  Table t;
  t.header = std::move(records[0]);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      std::ostringstream os;
      os << "line " << lines[r] << ": expected " << t.header.size() << " fields, found " << records[r].size();
      fail(ErrorKind::kInput, os.str());
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kInput, "cannot open " + path);
  return read(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool parse_double(const std::string& s, double& out) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  if (b == e) return false;
  if (s[b] == '+') ++b;
  const auto res = std::from_chars(s.data() + b, s.data() + e, out);
  return res.ec == std::errc() && res.ptr == s.data() + e && std::isfinite(out);
}

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string q = "\"";
  for (char c : field) {
    if (c == '"') q += '"';
    q += c;
  }
  q += '"';
  return q;
}

Writer& Writer::field(const std::string& s) {
  if (!first_) out_ << ',';
  out_ << quote(s);
  first_ = false;
  return *this;
}

Writer& Writer::field(double v) { return field(format_double(v)); }

Writer& Writer::field(long v) { return field(std::to_string(v)); }

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace r2d2::csv
