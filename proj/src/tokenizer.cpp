#include "mojidistill/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mojidistill/errors.hpp"
#include "mojidistill/unicode.hpp"

namespace moji {

bool is_special_token(std::string_view token) {
  return token == kPadToken || token == kUnknownToken || token == kUrlToken ||
         token == kMentionToken || token == kNumberToken;
}

EmojiSet::EmojiSet(std::vector<EmojiEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].id != static_cast<EmojiId>(i)) {
      throw DataError("emoji entry " + std::to_string(i) + " carries index " +
                      std::to_string(entries_[i].id));
    }
    if (entries_[i].codepoints.empty()) {
      throw DataError("emoji entry " + std::to_string(i) + " has no codepoints");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j].codepoints == entries_[i].codepoints) {
        throw DataError("duplicate emoji codepoint sequence at index " + std::to_string(i));
      }
    }
  }
  build_index();
}

void EmojiSet::build_index() {
  by_first_.clear();
  for (const EmojiEntry& e : entries_) {
    char32_t first = e.codepoints[0];
    auto it = std::find_if(by_first_.begin(), by_first_.end(),
                           [first](const FirstCp& f) { return f.cp == first; });
    if (it == by_first_.end()) {
      by_first_.push_back({first, {e.id}});
    } else {
      it->ids.push_back(e.id);
    }
  }
  // Longest-first so composed sequences win over their prefixes.
  for (FirstCp& f : by_first_) {
    std::sort(f.ids.begin(), f.ids.end(), [this](EmojiId a, EmojiId b) {
      std::size_t la = entries_[static_cast<std::size_t>(a)].codepoints.size();
      std::size_t lb = entries_[static_cast<std::size_t>(b)].codepoints.size();
      if (la != lb) return la > lb;
      return a < b;
    });
  }
}

EmojiId EmojiSet::match_at(std::u32string_view scalars, std::size_t pos,
                           std::size_t& matched_len) const {
  char32_t first = scalars[pos];
  auto it = std::find_if(by_first_.begin(), by_first_.end(),
                         [first](const FirstCp& f) { return f.cp == first; });
  if (it == by_first_.end()) return -1;
  for (EmojiId id : it->ids) {
    const std::u32string& seq = entries_[static_cast<std::size_t>(id)].codepoints;
    if (pos + seq.size() > scalars.size()) continue;
    if (scalars.compare(pos, seq.size(), seq) == 0) {
      matched_len = seq.size();
      return id;
    }
  }
  return -1;
}

EmojiSet EmojiSet::load(std::istream& in) {
  std::vector<EmojiEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++line_no;
      continue;
    }
    std::size_t tab1 = line.find('\t');
    std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos) {
      throw DataError("emoji set line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
    }
    EmojiEntry e;
    try {
      e.id = std::stoi(line.substr(0, tab1));
    } catch (const std::exception&) {
      throw DataError("emoji set line " + std::to_string(line_no) + ": bad index");
    }
    if (e.id != static_cast<EmojiId>(line_no)) {
      throw DataError("emoji set line " + std::to_string(line_no) + ": index " +
                      std::to_string(e.id) + " does not equal line number");
    }
    std::istringstream cps(line.substr(tab1 + 1, tab2 - tab1 - 1));
    std::string hex;
    while (cps >> hex) {
      try {
        e.codepoints.push_back(static_cast<char32_t>(std::stoul(hex, nullptr, 16)));
      } catch (const std::exception&) {
        throw DataError("emoji set line " + std::to_string(line_no) + ": bad codepoint '" + hex + "'");
      }
    }
    if (e.codepoints.empty()) {
      throw DataError("emoji set line " + std::to_string(line_no) + ": no codepoints");
    }
    e.name = line.substr(tab2 + 1);
    entries.push_back(std::move(e));
    ++line_no;
  }
  return EmojiSet(std::move(entries));
}

EmojiSet EmojiSet::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open emoji set file: " + path);
  return load(in);
}

void EmojiSet::save(std::ostream& out) const {
  for (const EmojiEntry& e : entries_) {
    out << e.id << '\t';
    for (std::size_t i = 0; i < e.codepoints.size(); ++i) {
      if (i) out << ' ';
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%X", static_cast<unsigned>(e.codepoints[i]));
      out << buf;
    }
    out << '\t' << e.name << '\n';
  }
}

namespace {

std::u32string collapse_runs(std::u32string_view scalars) {
  std::u32string out;
  out.reserve(scalars.size());
  std::size_t i = 0;
  while (i < scalars.size()) {
    std::size_t j = i;
    while (j < scalars.size() && scalars[j] == scalars[i]) ++j;
    std::size_t run = j - i;
    std::size_t keep = run >= 3 ? 2 : run;
    out.append(keep, scalars[i]);
    i = j;
  }
  return out;
}

bool is_url_unit(std::u32string_view lowered) {
  static const std::u32string kHttp = U"http://";
  static const std::u32string kHttps = U"https://";
  static const std::u32string kWww = U"www.";
  auto starts = [&lowered](const std::u32string& p) {
    return lowered.size() >= p.size() && lowered.compare(0, p.size(), p) == 0;
  };
  return starts(kHttp) || starts(kHttps) || starts(kWww);
}

bool is_mention_unit(std::u32string_view scalars) {
  if (scalars.size() < 2 || scalars[0] != U'@') return false;
  for (std::size_t i = 1; i < scalars.size(); ++i) {
    if (!uni::is_ascii_alnum(scalars[i])) return false;
  }
  return true;
}

bool is_number_unit(std::u32string_view scalars) {
  if (scalars.empty()) return false;
  bool seen_digit = false;
  bool seen_point = false;
  for (char32_t cp : scalars) {
    if (uni::is_ascii_digit(cp)) {
      seen_digit = true;
    } else if (cp == U'.' && !seen_point) {
      seen_point = true;
    } else {
      return false;
    }
  }
  return seen_digit;
}

bool is_punct_only(std::u32string_view scalars) {
  if (scalars.empty()) return false;
  for (char32_t cp : scalars) {
    if (!uni::is_punct_or_symbol(cp)) return false;
  }
  return true;
}

}  // namespace

std::string normalize_token(std::string_view word) {
  std::u32string scalars = uni::decode_utf8(word);
  for (char32_t& cp : scalars) cp = uni::to_lower(cp);
  return uni::encode_utf8(collapse_runs(scalars));
}

TokenSequence tokenize(const RawText& raw, const EmojiSet& emoji_set) {
  TokenSequence seq;
  std::u32string scalars = uni::decode_utf8(raw.text);

  auto emit_word = [&seq](std::u32string_view piece) {
    if (piece.empty()) return;
    if (is_number_unit(piece)) {
      seq.tokens.emplace_back(kNumberToken);
      return;
    }
    std::u32string lowered;
    lowered.reserve(piece.size());
    for (char32_t cp : piece) lowered.push_back(uni::to_lower(cp));
    std::u32string collapsed = collapse_runs(lowered);
    seq.tokens.push_back(uni::encode_utf8(collapsed));
    if (!is_punct_only(collapsed)) ++seq.content_token_count;
  };

  std::size_t i = 0;
  const std::size_t n = scalars.size();
  while (i < n) {
    while (i < n && (scalars[i] == U' ' || scalars[i] == U'\t' || scalars[i] == U'\n' ||
                     scalars[i] == U'\r' || scalars[i] == U'\v' || scalars[i] == U'\f')) {
      ++i;
    }
    if (i >= n) break;
    std::size_t start = i;
    while (i < n && scalars[i] != U' ' && scalars[i] != U'\t' && scalars[i] != U'\n' &&
           scalars[i] != U'\r' && scalars[i] != U'\v' && scalars[i] != U'\f') {
      ++i;
    }
    std::u32string_view unit(scalars.data() + start, i - start);

    // Structural classification happens on the whole whitespace unit; emoji
    // extraction only applies to ordinary units.
    std::u32string lowered_unit;
    lowered_unit.reserve(unit.size());
    for (char32_t cp : unit) lowered_unit.push_back(uni::to_lower(cp));
    if (is_url_unit(lowered_unit)) {
      seq.had_url = true;
      seq.tokens.emplace_back(kUrlToken);
      continue;
    }
    if (is_mention_unit(unit)) {
      seq.tokens.emplace_back(kMentionToken);
      continue;
    }

    std::size_t piece_start = 0;
    std::size_t p = 0;
    while (p < unit.size()) {
      std::size_t matched_len = 0;
      EmojiId id = emoji_set.match_at(unit, p, matched_len);
      if (id >= 0) {
        emit_word(unit.substr(piece_start, p - piece_start));
        seq.emojis_found.push_back(id);
        p += matched_len;
        piece_start = p;
      } else {
        ++p;
      }
    }
    emit_word(unit.substr(piece_start));
  }
  return seq;
}

bool is_pretrainable(const TokenSequence& seq) {
  return !seq.had_url && seq.content_token_count >= 1 && !seq.emojis_found.empty();
}

}  // namespace moji
