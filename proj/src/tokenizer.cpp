// Copyright 2026 The medzs Authors
// SPDX-License-Identifier: Apache-2.0

#include "medzs/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <cstring>
#include <fstream>
#include <limits>
#include <locale.h>
#include <string_view>
#include <wctype.h>

#include <fmt/format.h>

#include "medzs/error.hpp"

namespace medzs {

namespace {

// --- UTF-8 ------------------------------------------------------------------

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one code point starting at `i`; invalid sequences yield U+FFFD and
// consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto at = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F); };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2 && cont(1)) {
    const char32_t cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | at(1);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    const char32_t cp = (static_cast<char32_t>(b0 & 0x0F) << 12) | (at(1) << 6) | at(2);
    if (cp >= 0x800 && (cp < 0xD800 || cp > 0xDFFF)) {
      i += 3;
      return cp;
    }
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    const char32_t cp = (static_cast<char32_t>(b0 & 0x07) << 18) | (at(1) << 12) | (at(2) << 6) | at(3);
    if (cp >= 0x10000 && cp <= 0x10FFFF) {
      i += 4;
      return cp;
    }
  }
  ++i;
  return 0xFFFD;
}

std::u32string to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) out.push_back(next_code_point(s, i));
  return out;
}

std::string to_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) append_utf8(out, c);
  return out;
}

// --- Character classes ------------------------------------------------------

locale_t utf8_locale() {
  static const locale_t loc = [] {
    for (const char* name : {"C.UTF-8", "C.utf8", "en_US.UTF-8"}) {
      if (locale_t l = newlocale(LC_CTYPE_MASK, name, static_cast<locale_t>(nullptr))) return l;
    }
    return static_cast<locale_t>(nullptr);
  }();
  return loc;
}

// Unicode White_Space, the class matched by \s in patterns.
bool is_space(char32_t c) {
  if (c <= 0x20) return c == 0x20 || (c >= 0x09 && c <= 0x0D);
  switch (c) {
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

// Trimming additionally treats the ASCII information separators as space.
bool is_strip_space(char32_t c) { return is_space(c) || (c >= 0x1C && c <= 0x1F); }

// Numeric characters beyond ASCII digits: superscripts, vulgar fractions,
// the main decimal-digit blocks, number forms and enclosed numerals.
bool is_number(char32_t c) {
  if (c < 0x80) return c >= '0' && c <= '9';
  static constexpr std::array<std::pair<char32_t, char32_t>, 20> kRanges{{
      {0xB2, 0xB3}, {0xB9, 0xB9}, {0xBC, 0xBE}, {0x660, 0x669}, {0x6F0, 0x6F9},
      {0x7C0, 0x7C9}, {0x966, 0x96F}, {0x9E6, 0x9EF}, {0xE50, 0xE59}, {0x2070, 0x2070},
      {0x2074, 0x2079}, {0x2080, 0x2089}, {0x2150, 0x2182}, {0x2185, 0x2189},
      {0x2460, 0x249B}, {0x24EA, 0x24FF}, {0x2776, 0x2793}, {0x3007, 0x3007},
      {0x3021, 0x3029}, {0xFF10, 0xFF19},
  }};
  return std::any_of(kRanges.begin(), kRanges.end(),
                     [c](const auto& r) { return c >= r.first && c <= r.second; });
}

bool is_letter(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  if (is_number(c)) return false;
  const locale_t loc = utf8_locale();
  return loc != nullptr && iswalpha_l(static_cast<wint_t>(c), loc) != 0;
}

char32_t to_lower(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
  const locale_t loc = utf8_locale();
  return loc != nullptr ? static_cast<char32_t>(towlower_l(static_cast<wint_t>(c), loc)) : c;
}

// --- HTML character references ---------------------------------------------

struct NamedEntity {
  std::string_view name;
  char32_t cp;
};

constexpr std::array<std::string_view, 96> kLatin1Names{
    "nbsp",   "iexcl",  "cent",   "pound",  "curren", "yen",    "brvbar", "sect",
    "uml",    "copy",   "ordf",   "laquo",  "not",    "shy",    "reg",    "macr",
    "deg",    "plusmn", "sup2",   "sup3",   "acute",  "micro",  "para",   "middot",
    "cedil",  "sup1",   "ordm",   "raquo",  "frac14", "frac12", "frac34", "iquest",
    "Agrave", "Aacute", "Acirc",  "Atilde", "Auml",   "Aring",  "AElig",  "Ccedil",
    "Egrave", "Eacute", "Ecirc",  "Euml",   "Igrave", "Iacute", "Icirc",  "Iuml",
    "ETH",    "Ntilde", "Ograve", "Oacute", "Ocirc",  "Otilde", "Ouml",   "times",
    "Oslash", "Ugrave", "Uacute", "Ucirc",  "Uuml",   "Yacute", "THORN",  "szlig",
    "agrave", "aacute", "acirc",  "atilde", "auml",   "aring",  "aelig",  "ccedil",
    "egrave", "eacute", "ecirc",  "euml",   "igrave", "iacute", "icirc",  "iuml",
    "eth",    "ntilde", "ograve", "oacute", "ocirc",  "otilde", "ouml",   "divide",
    "oslash", "ugrave", "uacute", "ucirc",  "uuml",   "yacute", "thorn",  "yuml",
};

// Entities also recognized without the terminating semicolon.
constexpr std::array<NamedEntity, 10> kLegacyExtra{{
    {"amp", '&'}, {"AMP", '&'}, {"lt", '<'}, {"LT", '<'}, {"gt", '>'}, {"GT", '>'},
    {"quot", '"'}, {"QUOT", '"'}, {"COPY", 0xA9}, {"REG", 0xAE},
}};

// Entities that require the semicolon.
constexpr std::array<NamedEntity, 71> kSemicolonOnly{{
    {"apos", '\''},     {"ndash", 0x2013},  {"mdash", 0x2014},  {"lsquo", 0x2018},
    {"rsquo", 0x2019},  {"sbquo", 0x201A},  {"ldquo", 0x201C},  {"rdquo", 0x201D},
    {"bdquo", 0x201E},  {"hellip", 0x2026}, {"bull", 0x2022},   {"trade", 0x2122},
    {"euro", 0x20AC},   {"dagger", 0x2020}, {"Dagger", 0x2021}, {"permil", 0x2030},
    {"prime", 0x2032},  {"Prime", 0x2033},  {"larr", 0x2190},   {"uarr", 0x2191},
    {"rarr", 0x2192},   {"darr", 0x2193},   {"harr", 0x2194},   {"le", 0x2264},
    {"ge", 0x2265},     {"ne", 0x2260},     {"asymp", 0x2248},  {"infin", 0x221E},
    {"minus", 0x2212},  {"radic", 0x221A},  {"sum", 0x2211},    {"prod", 0x220F},
    {"ensp", 0x2002},   {"emsp", 0x2003},   {"thinsp", 0x2009}, {"zwnj", 0x200C},
    {"zwj", 0x200D},    {"lrm", 0x200E},    {"rlm", 0x200F},    {"OElig", 0x152},
    {"oelig", 0x153},   {"Scaron", 0x160},  {"scaron", 0x161},  {"Yuml", 0x178},
    {"fnof", 0x192},    {"circ", 0x2C6},    {"tilde", 0x2DC},   {"Alpha", 0x391},
    {"Beta", 0x392},    {"Gamma", 0x393},   {"Delta", 0x394},   {"Omega", 0x3A9},
    {"alpha", 0x3B1},   {"beta", 0x3B2},    {"gamma", 0x3B3},   {"delta", 0x3B4},
    {"epsilon", 0x3B5}, {"zeta", 0x3B6},    {"eta", 0x3B7},     {"theta", 0x3B8},
    {"kappa", 0x3BA},   {"lambda", 0x3BB},  {"mu", 0x3BC},      {"nu", 0x3BD},
    {"xi", 0x3BE},      {"pi", 0x3C0},      {"rho", 0x3C1},     {"sigma", 0x3C3},
    {"tau", 0x3C4},     {"phi", 0x3C6},     {"omega", 0x3C9},
}};

bool lookup_legacy(std::string_view name, char32_t& cp) {
  for (std::size_t i = 0; i < kLatin1Names.size(); ++i) {
    if (kLatin1Names[i] == name) {
      cp = static_cast<char32_t>(0xA0 + i);
      return true;
    }
  }
  for (const auto& e : kLegacyExtra) {
    if (e.name == name) {
      cp = e.cp;
      return true;
    }
  }
  return false;
}

bool lookup_with_semicolon(std::string_view name, char32_t& cp) {
  if (lookup_legacy(name, cp)) return true;
  for (const auto& e : kSemicolonOnly) {
    if (e.name == name) {
      cp = e.cp;
      return true;
    }
  }
  return false;
}

// Windows-1252 reinterpretation of C1 numeric references.
char32_t c1_replacement(std::uint32_t n) {
  static constexpr std::array<char32_t, 32> kTable{
      0x20AC, 0x81,   0x201A, 0x0192, 0x201E, 0x2026, 0x2020, 0x2021,
      0x02C6, 0x2030, 0x0160, 0x2039, 0x0152, 0x8D,   0x017D, 0x8F,
      0x90,   0x2018, 0x2019, 0x201C, 0x201D, 0x2022, 0x2013, 0x2014,
      0x02DC, 0x2122, 0x0161, 0x203A, 0x0153, 0x9D,   0x017E, 0x0178};
  return kTable[n - 0x80];
}

void append_numeric(std::string& out, std::uint64_t n) {
  if (n == 0) {
    append_utf8(out, 0xFFFD);
  } else if (n == 0x0D) {
    out.push_back('\r');
  } else if (n >= 0x80 && n <= 0x9F) {
    append_utf8(out, c1_replacement(static_cast<std::uint32_t>(n)));
  } else if ((n >= 0xD800 && n <= 0xDFFF) || n > 0x10FFFF) {
    append_utf8(out, 0xFFFD);
  } else if ((n >= 0x1 && n <= 0x8) || n == 0xB || (n >= 0xE && n <= 0x1F) || n == 0x7F ||
             (n >= 0xFDD0 && n <= 0xFDEF) || (n & 0xFFFE) == 0xFFFE) {
    // Non-characters and control codes are dropped.
  } else {
    append_utf8(out, static_cast<char32_t>(n));
  }
}

bool is_hex(char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

bool is_name_char(char c) {
  return c != '\t' && c != '\n' && c != '\f' && c != ' ' && c != '<' && c != '&' && c != '#' && c != ';';
}

// --- Byte-level alphabet ----------------------------------------------------

std::array<char32_t, 256> bytes_to_unicode() {
  std::array<char32_t, 256> table{};
  std::array<bool, 256> direct{};
  for (int b = '!'; b <= '~'; ++b) direct[b] = true;
  for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
  for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
  int n = 0;
  for (int b = 0; b < 256; ++b) table[b] = direct[b] ? static_cast<char32_t>(b) : static_cast<char32_t>(256 + n++);
  return table;
}

// Vocabulary order puts the directly mapped bytes first, then the remapped
// ones, mirroring the reference construction.
std::vector<int> byte_vocab_order() {
  std::vector<int> order;
  for (int b = '!'; b <= '~'; ++b) order.push_back(b);
  for (int b = 0xA1; b <= 0xAC; ++b) order.push_back(b);
  for (int b = 0xAE; b <= 0xFF; ++b) order.push_back(b);
  for (int b = 0; b < 256; ++b) {
    if (std::find(order.begin(), order.end(), b) == order.end()) order.push_back(b);
  }
  return order;
}

constexpr std::string_view kSot = "<|startoftext|>";
constexpr std::string_view kEot = "<|endoftext|>";
constexpr std::string_view kEndOfWord = "</w>";

}  // namespace

std::string html_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    const std::size_t start = i + 1;
    if (start < s.size() && s[start] == '#') {
      std::size_t j = start + 1;
      const bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
      if (hex) ++j;
      const std::size_t digits_begin = j;
      std::uint64_t n = 0;
      bool overflow = false;
      while (j < s.size() && (hex ? is_hex(s[j]) : (s[j] >= '0' && s[j] <= '9'))) {
        const char c = s[j];
        const int v = c <= '9' ? c - '0' : (c | 0x20) - 'a' + 10;
        if (n > (std::numeric_limits<std::uint64_t>::max() >> 4) / 2) overflow = true;
        if (!overflow) n = n * (hex ? 16 : 10) + static_cast<std::uint64_t>(v);
        ++j;
      }
      if (j == digits_begin) {
        out.push_back('&');
        i = start;
        continue;
      }
      if (j < s.size() && s[j] == ';') ++j;
      append_numeric(out, overflow ? std::numeric_limits<std::uint64_t>::max() : n);
      i = j;
      continue;
    }
    std::size_t j = start;
    while (j < s.size() && j - start < 32 && is_name_char(s[j])) ++j;
    if (j == start) {
      out.push_back('&');
      i = start;
      continue;
    }
    const bool semi = j < s.size() && s[j] == ';';
    const std::string_view name = s.substr(start, j - start);
    char32_t cp = 0;
    if (semi ? lookup_with_semicolon(name, cp) : lookup_legacy(name, cp)) {
      append_utf8(out, cp);
      i = semi ? j + 1 : j;
      continue;
    }
    // Longest legacy prefix, remainder kept verbatim.
    bool matched = false;
    const std::size_t full = name.size() + (semi ? 1 : 0);
    for (std::size_t x = full - 1; x > 1; --x) {
      if (x <= name.size() && lookup_legacy(name.substr(0, x), cp)) {
        append_utf8(out, cp);
        i = start + x;
        matched = true;
        break;
      }
    }
    if (!matched) {
      out.push_back('&');
      i = start;
    }
  }
  return out;
}

std::string clean_text(std::string_view text) {
  const std::u32string u = to_u32(html_unescape(html_unescape(text)));
  std::size_t begin = 0;
  std::size_t end = u.size();
  while (begin < end && is_strip_space(u[begin])) ++begin;
  while (end > begin && is_strip_space(u[end - 1])) --end;
  std::u32string collapsed;
  collapsed.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    if (is_space(u[i])) {
      if (collapsed.empty() || collapsed.back() != U' ' || !is_space(u[i - 1])) collapsed.push_back(U' ');
      continue;
    }
    collapsed.push_back(u[i]);
  }
  begin = 0;
  end = collapsed.size();
  while (begin < end && is_strip_space(collapsed[begin])) ++begin;
  while (end > begin && is_strip_space(collapsed[end - 1])) --end;
  std::u32string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    // U+0130 is the only code point whose full lowercase mapping expands.
    if (collapsed[i] == 0x130) {
      out.append(U"i\u0307");
      continue;
    }
    out.push_back(to_lower(collapsed[i]));
  }
  return to_utf8(out);
}

std::vector<std::string> pre_tokenize(std::string_view cleaned) {
  static constexpr std::array<std::u32string_view, 7> kContractions{U"'s", U"'t", U"'re", U"'ve",
                                                                   U"'m", U"'ll", U"'d"};
  const std::u32string u = to_u32(cleaned);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  auto starts_with_ci = [&](std::u32string_view lit) {
    if (u.size() - i < lit.size()) return false;
    for (std::size_t k = 0; k < lit.size(); ++k) {
      if (to_lower(u[i + k]) != lit[k]) return false;
    }
    return true;
  };
  while (i < u.size()) {
    const char32_t c = u[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    if (starts_with_ci(U"<|startoftext|>")) {
      len = kSot.size();
    } else if (starts_with_ci(U"<|endoftext|>")) {
      len = kEot.size();
    } else {
      for (auto lit : kContractions) {
        if (starts_with_ci(lit)) {
          len = lit.size();
          break;
        }
      }
    }
    if (len == 0) {
      if (is_letter(c)) {
        len = 1;
        while (i + len < u.size() && is_letter(u[i + len])) ++len;
      } else if (is_number(c)) {
        len = 1;
      } else {
        len = 1;
        while (i + len < u.size() && !is_space(u[i + len]) && !is_letter(u[i + len]) && !is_number(u[i + len])) {
          ++len;
        }
      }
    }
    tokens.push_back(to_utf8(std::u32string_view(u).substr(i, len)));
    i += len;
  }
  return tokens;
}

BpeTokenizer::BpeTokenizer(std::vector<Merge> merges, int context_length, std::int64_t pad_id)
    : pad_id_(pad_id), context_length_(context_length) {
  if (context_length < 2) throw Error(ErrorCode::kInvalidArgument, "context length must be at least 2");
  const auto table = bytes_to_unicode();
  for (int b = 0; b < 256; ++b) {
    byte_encoder_[b].clear();
    append_utf8(byte_encoder_[b], table[b]);
  }
  std::vector<std::string> vocab;
  const auto order = byte_vocab_order();
  for (int b : order) vocab.push_back(byte_encoder_[b]);
  for (int b : order) vocab.push_back(byte_encoder_[b] + std::string(kEndOfWord));
  for (const auto& [a, b] : merges) vocab.push_back(a + b);
  vocab.emplace_back(kSot);
  vocab.emplace_back(kEot);
  // Later entries win when two merges spell the same symbol.
  for (std::size_t i = 0; i < vocab.size(); ++i) encoder_[vocab[i]] = static_cast<std::int64_t>(i);
  for (std::size_t r = 0; r < merges.size(); ++r) {
    ranks_[merges[r].first + " " + merges[r].second] = static_cast<int>(r);
  }
  sot_id_ = encoder_.at(std::string(kSot));
  eot_id_ = encoder_.at(std::string(kEot));
  vocab_size_ = vocab.size();
}

BpeTokenizer BpeTokenizer::from_file(const std::filesystem::path& merges_path, int context_length,
                                     std::int64_t pad_id) {
  std::ifstream in(merges_path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open merges file {}", merges_path.string()));
  std::vector<Merge> merges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("#version", 0) == 0) continue;
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size() || line.find(' ', sp + 1) != std::string::npos) {
      throw Error(ErrorCode::kParse, fmt::format("{}:{}: malformed merge entry", merges_path.string(), line_no));
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  if (merges.empty()) throw Error(ErrorCode::kParse, fmt::format("{}: no merges found", merges_path.string()));
  return BpeTokenizer(std::move(merges), context_length, pad_id);
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& token) const {
  if (token == kSot || token == kEot) return {token};
  std::vector<std::string> word;
  for (std::size_t i = 0; i < token.size();) {
    const std::size_t begin = i;
    next_code_point(token, i);
    word.push_back(token.substr(begin, i - begin));
  }
  word.back() += kEndOfWord;
  std::string key;
  while (word.size() > 1) {
    int best_rank = INT_MAX;
    std::size_t best = 0;
    for (std::size_t k = 0; k + 1 < word.size(); ++k) {
      key.assign(word[k]).append(" ").append(word[k + 1]);
      const auto it = ranks_.find(key);
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = k;
      }
    }
    if (best_rank == INT_MAX) break;
    const std::string first = word[best];
    const std::string second = word[best + 1];
    std::vector<std::string> merged;
    merged.reserve(word.size());
    for (std::size_t k = 0; k < word.size();) {
      if (k + 1 < word.size() && word[k] == first && word[k + 1] == second) {
        merged.push_back(first + second);
        k += 2;
      } else {
        merged.push_back(word[k]);
        ++k;
      }
    }
    word = std::move(merged);
  }
  return word;
}

std::vector<std::int64_t> BpeTokenizer::encode(std::string_view text) const {
  std::vector<std::int64_t> ids;
  for (const auto& piece : pre_tokenize(clean_text(text))) {
    std::string mapped;
    for (unsigned char b : piece) mapped += byte_encoder_[b];
    for (const auto& sym : bpe(mapped)) {
      const auto it = encoder_.find(sym);
      if (it == encoder_.end()) throw Error(ErrorCode::kParse, fmt::format("symbol '{}' missing from vocabulary", sym));
      ids.push_back(it->second);
    }
  }
  return ids;
}

TokenSequence BpeTokenizer::tokenize(std::string_view text) const {
  TokenSequence seq;
  seq.ids.reserve(static_cast<std::size_t>(context_length_));
  seq.ids.push_back(sot_id_);
  for (std::int64_t id : encode(text)) {
    if (static_cast<int>(seq.ids.size()) == context_length_) break;
    seq.ids.push_back(id);
  }
  if (static_cast<int>(seq.ids.size()) == context_length_) {
    seq.ids.back() = eot_id_;
  } else {
    seq.ids.push_back(eot_id_);
  }
  seq.ids.resize(static_cast<std::size_t>(context_length_), pad_id_);
  return seq;
}

}  // namespace medzs
