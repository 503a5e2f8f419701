#pragma once

// Tokenization and segmentation. The tokenizer lowercases ASCII letters,
// keeps alphanumeric runs (bytes >= 0x80 are treated as word bytes so
// UTF-8 sequences stay intact) and emits every other printable character
// as a standalone token: "Plant's" -> [plant, ', s].
// tokenize(join(tokens, " ")) == tokens.

#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stance {

inline bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      if (!cur.empty()) {
        tokens.push_back(std::move(cur));
        cur.clear();
      }
      if (!std::isspace(c)) tokens.push_back(std::string(1, static_cast<char>(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens,
                               std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end && i < tokens.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace detail {

inline bool blank_line(std::string_view line) {
  for (unsigned char c : line)
    if (!std::isspace(c)) return false;
  return true;
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = i + 1;
    }
  }
  return lines;
}

}  // namespace detail

// Paragraphs are blocks separated by blank lines. Bodies that use a
// single newline per paragraph (no blank lines at all) fall back to
// splitting on every newline.
inline std::vector<std::string> split_paragraphs(std::string_view text) {
  auto lines = detail::split_lines(text);
  bool has_blank_boundary = false;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i)
    if (detail::blank_line(lines[i])) has_blank_boundary = true;

  std::vector<std::string> paragraphs;
  std::string cur;
  auto flush = [&] {
    std::string_view t = detail::trim(cur);
    if (!t.empty()) paragraphs.emplace_back(t);
    cur.clear();
  };
  for (auto line : lines) {
    if (detail::blank_line(line)) {
      flush();
    } else if (has_blank_boundary) {
      if (!cur.empty()) cur += '\n';
      cur += line;
    } else {
      cur.assign(line);
      flush();
    }
  }
  flush();
  return paragraphs;
}

// Sentence spans over a token sequence: a sentence ends after '.', '!'
// or '?'. Returns half-open [begin, end) token index ranges.
inline std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(
    const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t start = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& t = tokens[i];
    if (t == "." || t == "!" || t == "?") {
      spans.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  if (start < tokens.size()) spans.emplace_back(start, tokens.size());
  return spans;
}

}  // namespace stance
