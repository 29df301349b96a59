#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace moji {

struct Example;

/// Token -> index map with a reserved region and an append-only extension
/// region. The base region never changes after pretraining; fine-tuning may
/// append new tokens behind it.
class Vocabulary {
 public:
  static constexpr int kPadIndex = 0;
  static constexpr int kUnknownIndex = 1;
  static constexpr int kUrlIndex = 2;
  static constexpr int kMentionIndex = 3;
  static constexpr int kNumberIndex = 4;
  static constexpr int kReservedCount = 5;

  Vocabulary();

  int lookup(std::string_view token) const;  // kUnknownIndex when absent
  bool contains(std::string_view token) const;
  const std::string& token(int index) const { return tokens_[static_cast<std::size_t>(index)]; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int base_size() const { return base_size_; }
  int extended_size() const { return static_cast<int>(tokens_.size()); }

  /// Order-sensitive fingerprint of the full token list and region sizes.
  std::uint64_t hash() const;

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load_file(const std::string& path);

  friend Vocabulary build_vocab(const std::vector<Example>& examples, int max_size);
  friend Vocabulary extend_vocab(const Vocabulary& base, const std::vector<Example>& train_examples,
                                 int limit);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int base_size_ = kReservedCount;

  void append_token(const std::string& token);
};

/// Frequency-ranked vocabulary over example tokens; ties break
/// lexicographically. `max_size` caps the non-reserved region.
Vocabulary build_vocab(const std::vector<Example>& examples, int max_size);

/// Appends up to `limit` unseen tokens behind the base region,
/// frequency-ranked. Base indices are never remapped.
Vocabulary extend_vocab(const Vocabulary& base, const std::vector<Example>& train_examples,
                        int limit = 10000);

/// Fraction of token occurrences in the test examples covered by the
/// vocabulary. Special tokens are excluded from the denominator.
double word_coverage(const Vocabulary& vocab, const std::vector<Example>& test_examples);

}  // namespace moji
