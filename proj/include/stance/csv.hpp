#pragma once

// RFC-4180 CSV reading and writing. Quoted fields may contain commas,
// escaped quotes ("") and embedded line breaks; article bodies rely on
// all three. Line endings are normalized to \n inside quoted fields.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stance::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t record_no = 0;  // 1-based, header is record 1
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t record_no)
      : std::runtime_error("csv: " + what + " (record " +
                           std::to_string(record_no) + ")"),
        record(record_no) {}
  std::size_t record;
};

inline std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row cur;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t record_no = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();

  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    cur.record_no = record_no++;
    rows.push_back(std::move(cur));
    cur = Row{};
  };

  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else if (c == '\r') {
        field += '\n';
        if (i + 1 < n && text[i + 1] == '\n') ++i;
        ++i;
      } else {
        field += c;
        ++i;
      }
    } else {
      switch (c) {
        case '"':
          if (!field.empty() || field_was_quoted)
            throw ParseError("stray quote inside unquoted field", record_no);
          in_quotes = true;
          field_was_quoted = true;
          ++i;
          break;
        case ',':
          end_field();
          ++i;
          break;
        case '\r':
          end_record();
          if (i + 1 < n && text[i + 1] == '\n') ++i;
          ++i;
          break;
        case '\n':
          end_record();
          ++i;
          break;
        default:
          field += c;
          ++i;
      }
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", record_no);
  if (!field.empty() || field_was_quoted || !cur.fields.empty()) end_record();

  // A trailing all-empty record comes from a final newline; drop it.
  if (!rows.empty() && rows.back().fields.size() == 1 &&
      rows.back().fields[0].empty())
    rows.pop_back();
  return rows;
}

inline std::vector<Row> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  // Strip a UTF-8 BOM if present.
  if (text.size() >= 3 && text.compare(0, 3, "\xef\xbb\xbf") == 0)
    text.erase(0, 3);
  return parse(text);
}

inline std::string quote(std::string_view field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace stance::csv
