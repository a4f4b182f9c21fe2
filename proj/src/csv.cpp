#include "irlrec/csv.hpp"

namespace irlrec {

CsvReader::CsvReader(const std::string& path, char delimiter)
    : in_(path), path_(path), delim_(delimiter) {
  if (!in_) throw DataError("cannot open file: " + path);
  std::vector<std::string> row;
  if (!next_row(row)) throw DataError("empty file: " + path);
  header_ = row;
}

int CsvReader::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<int>(i);
  throw DataError(path_ + ": missing column '" + name + "'");
}

bool CsvReader::next_row(std::vector<std::string>& fields) {
  fields.clear();
  std::string line;
  if (!std::getline(in_, line)) return false;
  ++line_;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == line.size()) {
      if (!quoted) break;
      // Embedded newline inside quotes: pull the next physical line.
      std::string cont;
      if (!std::getline(in_, cont))
        throw DataError(path_ + ":" + std::to_string(line_) +
                        ": unterminated quoted field");
      ++line_;
      line += '\n';
      line += cont;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim_) {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r' || i + 1 != line.size()) {
      field += c;
    }
    ++i;
  }
  fields.push_back(std::move(field));
  return true;
}

}  // namespace irlrec
