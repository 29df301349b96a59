#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace moji {

using EmojiId = int;

// Special token literals. They survive lowercasing and repeat collapsing
// unchanged and occupy the reserved region of every vocabulary.
inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnknownToken = "<unk>";
inline constexpr const char* kUrlToken = "<url>";
inline constexpr const char* kMentionToken = "<mention>";
inline constexpr const char* kNumberToken = "<number>";

bool is_special_token(std::string_view token);

struct RawText {
  std::string id;
  std::string text;
};

/// Normalized token sequence for one text.
struct TokenSequence {
  std::vector<std::string> tokens;
  bool had_url = false;
  // Emoji occurrences in reading order, repetitions kept.
  std::vector<EmojiId> emojis_found;
  // Tokens that are not punctuation/symbol-only, not emoji, not special.
  std::size_t content_token_count = 0;
};

struct EmojiEntry {
  EmojiId id = 0;
  std::u32string codepoints;
  std::string name;
};

/// Ordered emoji inventory. Label indices depend on entry order, so the
/// on-disk order is part of the dataset contract.
class EmojiSet {
 public:
  EmojiSet() = default;
  explicit EmojiSet(std::vector<EmojiEntry> entries);

  std::size_t size() const { return entries_.size(); }
  const EmojiEntry& entry(EmojiId id) const { return entries_[static_cast<std::size_t>(id)]; }
  const std::vector<EmojiEntry>& entries() const { return entries_; }

  /// Longest match among entries starting at scalars[pos]; -1 if none.
  /// Returns the matched length through `matched_len`.
  EmojiId match_at(std::u32string_view scalars, std::size_t pos, std::size_t& matched_len) const;

  /// One record per line: `<index>\t<codepoints hex, space separated>\t<name>`.
  /// The index must equal the zero-based line number.
  static EmojiSet load(std::istream& in);
  static EmojiSet load_file(const std::string& path);
  void save(std::ostream& out) const;

 private:
  std::vector<EmojiEntry> entries_;
  // Entry ids grouped by first codepoint, longest sequence first.
  struct FirstCp {
    char32_t cp;
    std::vector<EmojiId> ids;
  };
  std::vector<FirstCp> by_first_;
  void build_index();
};

/// Collapses every run of 3+ identical scalars to exactly 2, after a simple
/// lowercase fold. Idempotent: "loool" and "looooool" both become "lool".
std::string normalize_token(std::string_view word);

/// Whitespace tokenization with URL/mention/number replacement and in-set
/// emoji extraction. Emojis act as separators inside a unit and never appear
/// in the output tokens.
TokenSequence tokenize(const RawText& raw, const EmojiSet& emoji_set);

/// Pretraining filter: no URL, at least one content token, at least one
/// in-set emoji.
bool is_pretrainable(const TokenSequence& seq);

}  // namespace moji
