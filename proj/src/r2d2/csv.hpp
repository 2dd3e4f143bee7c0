#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace r2d2::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // -1 if absent
  int column(const std::string& name) const;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF. Throws
// kInput with the line number on ragged rows or unterminated quotes.
Table read(std::istream& in);
Table read_file(const std::string& path);

// Shortest string that parses back to the same double.
std::string format_double(double v);
// Strict full-field parse; false on anything but a finite number.
bool parse_double(const std::string& s, double& out);

std::string quote(const std::string& field);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  Writer& field(const std::string& s);
  Writer& field(double v);
  Writer& field(long v);
  Writer& field(int v) { return field(static_cast<long>(v)); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace r2d2::csv
