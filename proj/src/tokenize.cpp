#include <array>
#include <cctype>

#include "fedvuln/corpus.hpp"

namespace fedvuln {

namespace {

// Sorted longest first so the first hit is the longest match.
constexpr std::array<std::string_view, 26> kOperators = {
    "<<=", ">>=", "...", "->*",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", "##", ".*",
};

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$'; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$'; }

std::size_t scan_number(std::string_view s, std::size_t i) {
  const std::size_t n = s.size();
  if (s[i] == '0' && i + 1 < n && (s[i + 1] == 'x' || s[i + 1] == 'X')) {
    i += 2;
    while (i < n && (std::isxdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
    if (i < n && (s[i] == 'p' || s[i] == 'P')) {
      ++i;
      if (i < n && (s[i] == '+' || s[i] == '-')) ++i;
      while (i < n && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    }
  } else {
    while (i < n && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.')) ++i;
    if (i < n && (s[i] == 'e' || s[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < n && (s[j] == '+' || s[j] == '-')) ++j;
      if (j < n && std::isdigit(static_cast<unsigned char>(s[j]))) {
        i = j;
        while (i < n && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      }
    }
  }
  // integer/float suffixes (u, l, f, ...)
  while (i < n && ident_char(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

std::size_t scan_quoted(std::string_view s, std::size_t i) {
  const char quote = s[i++];
  while (i < s.size() && s[i] != quote && s[i] != '\n') {
    if (s[i] == '\\' && i + 1 < s.size()) ++i;
    ++i;
  }
  return i < s.size() && s[i] == quote ? i + 1 : i;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view code) {
  std::vector<std::string> out;
  const std::size_t n = code.size();
  std::size_t i = 0;
  while (i < n) {
    const auto c = static_cast<unsigned char>(code[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && code[i + 1] == '/') {
      while (i < n && code[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && code[i + 1] == '*') {
      const auto end = code.find("*/", i + 2);
      i = end == std::string_view::npos ? n : end + 2;
      continue;
    }
    std::size_t j = i;
    if (ident_start(c)) {
      while (j < n && ident_char(static_cast<unsigned char>(code[j]))) ++j;
    } else if (std::isdigit(c) ||
               (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(code[i + 1])))) {
      j = scan_number(code, i);
    } else if (c == '"' || c == '\'') {
      j = scan_quoted(code, i);
    } else {
      j = i + 1;
      for (auto op : kOperators) {
        if (code.substr(i, op.size()) == op) {
          j = i + op.size();
          break;
        }
      }
    }
    out.emplace_back(code.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace fedvuln
