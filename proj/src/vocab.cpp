#include "mojidistill/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "mojidistill/corpus.hpp"
#include "mojidistill/errors.hpp"
#include "mojidistill/hash.hpp"

namespace moji {

Vocabulary::Vocabulary() {
  for (const char* tok : {kPadToken, kUnknownToken, kUrlToken, kMentionToken, kNumberToken}) {
    append_token(tok);
  }
  base_size_ = kReservedCount;
}

void Vocabulary::append_token(const std::string& token) {
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

int Vocabulary::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownIndex : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::uint64_t Vocabulary::hash() const {
  Fnv1a h;
  for (const std::string& t : tokens_) {
    h.update(t);
    h.update("\n");
  }
  h.update_value(static_cast<std::uint32_t>(base_size_));
  h.update_value(static_cast<std::uint32_t>(tokens_.size()));
  return h.digest();
}

void Vocabulary::save(std::ostream& out) const {
  out << "mojidistill-vocab 1\n";
  out << base_size_ << ' ' << tokens_.size() << '\n';
  for (std::size_t i = kReservedCount; i < tokens_.size(); ++i) {
    out << tokens_[i] << '\n';
  }
}

void Vocabulary::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  save(out);
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "mojidistill-vocab" || version != 1) {
    throw DataError("not a mojidistill vocabulary file");
  }
  std::size_t base = 0, total = 0;
  if (!(in >> base >> total) || base < kReservedCount || total < base) {
    throw DataError("vocabulary file has bad region sizes");
  }
  Vocabulary v;
  std::string token;
  while (v.tokens_.size() < total && (in >> token)) {
    if (v.contains(token)) throw DataError("duplicate token in vocabulary file: " + token);
    v.append_token(token);
  }
  if (v.tokens_.size() != total) throw DataError("vocabulary file truncated");
  v.base_size_ = static_cast<int>(base);
  return v;
}

Vocabulary Vocabulary::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  return load(in);
}

namespace {

std::vector<std::pair<std::string, std::size_t>> ranked_counts(
    const std::vector<Example>& examples, const Vocabulary* skip_if_present) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const Example& ex : examples) {
    for (const std::string& tok : ex.tokens) {
      if (is_special_token(tok)) continue;
      if (skip_if_present && skip_if_present->contains(tok)) continue;
      ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

}  // namespace

Vocabulary build_vocab(const std::vector<Example>& examples, int max_size) {
  Vocabulary v;
  auto ranked = ranked_counts(examples, nullptr);
  std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(max_size, 0)));
  for (std::size_t i = 0; i < keep; ++i) v.append_token(ranked[i].first);
  v.base_size_ = static_cast<int>(v.tokens_.size());
  return v;
}

Vocabulary extend_vocab(const Vocabulary& base, const std::vector<Example>& train_examples,
                        int limit) {
  Vocabulary v = base;
  auto ranked = ranked_counts(train_examples, &base);
  std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(limit, 0)));
  for (std::size_t i = 0; i < keep; ++i) v.append_token(ranked[i].first);
  return v;
}

double word_coverage(const Vocabulary& vocab, const std::vector<Example>& test_examples) {
  std::size_t covered = 0, total = 0;
  for (const Example& ex : test_examples) {
    for (const std::string& tok : ex.tokens) {
      if (is_special_token(tok)) continue;
      ++total;
      if (vocab.contains(tok)) ++covered;
    }
  }
  if (total == 0) return 1.0;
  return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace moji
