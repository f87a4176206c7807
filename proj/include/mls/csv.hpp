#pragma once

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>

namespace mls {

// Formats a double with shortest-roundtrip precision (std::to_chars), so CSV
// values reparse to the exact bits that were written.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

// Line-oriented CSV writer: UTF-8, LF endings, header written up front.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    out_ << header << '\n';
  }

  // `row` must already be comma-joined.
  void write_row(const std::string& row) { out_ << row << '\n'; }

  void flush() { out_.flush(); }

  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
};

}  // namespace mls
