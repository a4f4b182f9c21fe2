#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "irlrec/common.hpp"

namespace irlrec {

// Minimal RFC-4180-style reader: comma (or custom) delimiter, double-quoted
// fields with "" escapes, tolerant of trailing \r. One row per line except
// inside quotes.
class CsvReader {
 public:
  CsvReader(const std::string& path, char delimiter = ',');

  // Returns false at end of file. Throws DataError on malformed quoting.
  bool next_row(std::vector<std::string>& fields);

  const std::vector<std::string>& header() const { return header_; }
  // Column index for `name`; throws DataError naming file and column.
  int column(const std::string& name) const;
  const std::string& path() const { return path_; }
  std::size_t line_number() const { return line_; }

 private:
  std::ifstream in_;
  std::string path_;
  char delim_;
  std::size_t line_ = 0;
  std::vector<std::string> header_;
};

}  // namespace irlrec
