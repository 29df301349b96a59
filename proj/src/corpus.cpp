#include "mojidistill/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>
#include <unordered_map>

#include "mojidistill/errors.hpp"

namespace moji {

std::vector<Example> build_examples(const std::vector<RawText>& texts, const EmojiSet& emoji_set,
                                    BuildStats* stats, int workers) {
  std::vector<TokenSequence> sequences(texts.size());
  workers = std::max(1, workers);
  if (workers == 1 || texts.size() < 2) {
    for (std::size_t i = 0; i < texts.size(); ++i) sequences[i] = tokenize(texts[i], emoji_set);
  } else {
    std::vector<std::thread> pool;
    std::size_t n = texts.size();
    std::size_t shard = (n + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      std::size_t begin = static_cast<std::size_t>(w) * shard;
      std::size_t end = std::min(n, begin + shard);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        for (std::size_t i = begin; i < end; ++i) sequences[i] = tokenize(texts[i], emoji_set);
      });
    }
    for (std::thread& t : pool) t.join();
  }

  BuildStats local;
  local.per_class.assign(emoji_set.size(), 0);
  std::vector<Example> out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const TokenSequence& seq = sequences[i];
    ++local.texts_seen;
    if (seq.had_url) {
      ++local.skipped_url;
      continue;
    }
    if (seq.content_token_count < 1) {
      ++local.skipped_no_content;
      continue;
    }
    if (seq.emojis_found.empty()) {
      ++local.skipped_no_emoji;
      continue;
    }
    ++local.texts_kept;
    // One example per unique emoji type, in order of first appearance.
    std::vector<EmojiId> unique;
    for (EmojiId id : seq.emojis_found) {
      if (std::find(unique.begin(), unique.end(), id) == unique.end()) unique.push_back(id);
    }
    for (EmojiId id : unique) {
      Example ex;
      ex.id = texts[i].id;
      ex.tokens = seq.tokens;
      ex.label = id;
      out.push_back(std::move(ex));
      ++local.examples_emitted;
      ++local.per_class[static_cast<std::size_t>(id)];
    }
  }
  if (stats) *stats = std::move(local);
  return out;
}

namespace {

std::string sequence_key(const std::vector<std::string>& tokens) {
  std::string key;
  for (const std::string& t : tokens) {
    key += t;
    key += '\x1f';
  }
  return key;
}

}  // namespace

DatasetSplit balanced_split(const std::vector<Example>& examples, std::size_t per_class_val,
                            std::size_t per_class_test, int class_count, std::uint64_t seed) {
  const std::size_t need = per_class_val + per_class_test;
  std::vector<std::size_t> have(static_cast<std::size_t>(class_count), 0);
  for (const Example& ex : examples) {
    if (ex.label < 0 || ex.label >= class_count) {
      throw DataError("example label " + std::to_string(ex.label) + " outside [0, " +
                      std::to_string(class_count) + ")");
    }
    ++have[static_cast<std::size_t>(ex.label)];
  }
  for (int c = 0; c < class_count; ++c) {
    if (have[static_cast<std::size_t>(c)] < need) {
      throw InsufficientClassCount(c, have[static_cast<std::size_t>(c)], need);
    }
  }

  // Group examples sharing a normalized token sequence so no sequence leaks
  // across the train/eval boundary.
  struct Group {
    std::string min_id;
    std::vector<std::size_t> members;
  };
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    std::string key = sequence_key(examples[i].tokens);
    auto [it, inserted] = group_of.emplace(std::move(key), groups.size());
    if (inserted) groups.push_back({examples[i].id, {}});
    Group& g = groups[it->second];
    g.members.push_back(i);
    if (examples[i].id < g.min_id) g.min_id = examples[i].id;
  }

  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&groups](std::size_t a, std::size_t b) {
    return groups[a].min_id < groups[b].min_id;
  });
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> need_val(static_cast<std::size_t>(class_count), per_class_val);
  std::vector<std::size_t> need_test(static_cast<std::size_t>(class_count), per_class_test);
  auto fits = [&](const Group& g, const std::vector<std::size_t>& needs) {
    std::vector<std::size_t> take(static_cast<std::size_t>(class_count), 0);
    for (std::size_t m : g.members) ++take[static_cast<std::size_t>(examples[m].label)];
    for (int c = 0; c < class_count; ++c) {
      std::size_t ci = static_cast<std::size_t>(c);
      if (take[ci] > needs[ci]) return false;
    }
    return true;
  };
  auto consume = [&](const Group& g, std::vector<std::size_t>& needs) {
    for (std::size_t m : g.members) --needs[static_cast<std::size_t>(examples[m].label)];
  };

  DatasetSplit split;
  split.class_count = class_count;
  split.seed = seed;
  auto remaining = [](const std::vector<std::size_t>& needs) {
    for (std::size_t n : needs)
      if (n > 0) return true;
    return false;
  };
  for (std::size_t gi : order) {
    const Group& g = groups[gi];
    if (remaining(need_val) && fits(g, need_val)) {
      consume(g, need_val);
      for (std::size_t m : g.members) split.validation.push_back(examples[m]);
    } else if (remaining(need_test) && fits(g, need_test)) {
      consume(g, need_test);
      for (std::size_t m : g.members) split.test.push_back(examples[m]);
    } else {
      for (std::size_t m : g.members) split.train.push_back(examples[m]);
    }
  }
  for (int c = 0; c < class_count; ++c) {
    std::size_t ci = static_cast<std::size_t>(c);
    if (need_val[ci] > 0 || need_test[ci] > 0) {
      throw DataError("balanced_split: could not reach exact per-class counts for class " +
                      std::to_string(c) + "; duplicate-sequence grouping starved the class");
    }
  }
  return split;
}

std::vector<Example> upsample(const std::vector<Example>& train, int class_count,
                              std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < train.size(); ++i) {
    int label = train[i].label;
    if (label < 0 || label >= class_count) {
      throw DataError("example label " + std::to_string(label) + " outside [0, " +
                      std::to_string(class_count) + ")");
    }
    by_class[static_cast<std::size_t>(label)].push_back(i);
  }
  std::size_t majority = 0;
  for (int c = 0; c < class_count; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.empty()) throw EmptyClass(c);
    majority = std::max(majority, members.size());
  }
  std::vector<Example> out = train;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < class_count; ++c) {
    const auto& members = by_class[static_cast<std::size_t>(c)];
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (std::size_t n = members.size(); n < majority; ++n) {
      out.push_back(train[members[pick(rng)]]);
    }
  }
  return out;
}

std::vector<Example> project_binary(const std::vector<Example>& examples,
                                    const std::map<int, Polarity>& polarity_map) {
  std::vector<Example> out;
  for (const Example& ex : examples) {
    auto it = polarity_map.find(ex.label);
    if (it == polarity_map.end()) continue;
    Example mapped = ex;
    mapped.label = it->second == Polarity::kPositive ? 1 : 0;
    out.push_back(std::move(mapped));
  }
  return out;
}

std::optional<int> valence_arousal_class(const AffectRatings& r, double threshold) {
  auto pick_side = [threshold](double low, double high) -> std::optional<bool> {
    bool low_ok = low >= threshold;
    bool high_ok = high >= threshold;
    if (!low_ok && !high_ok) return std::nullopt;
    if (low_ok && high_ok) {
      if (low == high) return std::nullopt;  // exact tie drops the record
      return high > low;
    }
    return high_ok;
  };
  auto valence_high = pick_side(r.valence_low, r.valence_high);
  auto arousal_high = pick_side(r.arousal_low, r.arousal_high);
  if (!valence_high || !arousal_high) return std::nullopt;
  return (*valence_high ? 2 : 0) | (*arousal_high ? 1 : 0);
}

ValenceArousalResult valence_arousal_classes(const std::vector<AffectRatings>& ratings,
                                             double threshold) {
  ValenceArousalResult res;
  res.labels.reserve(ratings.size());
  for (const AffectRatings& r : ratings) {
    auto label = valence_arousal_class(r, threshold);
    if (!label) ++res.dropped;
    res.labels.push_back(label);
  }
  return res;
}

ConsensusResult consensus_agreement(const std::vector<RatingRecord>& records,
                                    const std::optional<std::vector<int>>& predictions,
                                    std::uint64_t seed) {
  if (predictions && predictions->size() != records.size()) {
    throw DataError("predictions must align one-to-one with rating records");
  }
  std::mt19937_64 rng(seed);
  std::size_t agreed = 0;
  ConsensusResult res;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const RatingRecord& rec = records[i];
    if (rec.scores.size() < 10) throw TooFewRaters(rec.id);
    std::vector<double> numeric;
    for (double s : rec.scores) {
      if (s != RatingRecord::kDoNotKnow) numeric.push_back(s);
    }
    std::size_t dont_know = rec.scores.size() - numeric.size();
    if (dont_know * 2 > rec.scores.size()) {
      ++res.dropped_dont_know;
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, numeric.size() - 1);
    std::size_t held_out = pick(rng);
    double sum = 0;
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      if (k != held_out) sum += numeric[k];
    }
    double mean = sum / static_cast<double>(numeric.size() - 1);
    if (mean >= 4.5 && mean <= 5.5) {
      ++res.dropped_neutral;
      continue;
    }
    int consensus = mean > 5.0 ? 1 : 0;
    int verdict;
    if (predictions) {
      verdict = (*predictions)[i];
    } else {
      double h = numeric[held_out];
      verdict = h > 5.0 ? 1 : (h < 5.0 ? 0 : -1);  // a dead-neutral rater never agrees
    }
    ++res.records_used;
    if (verdict == consensus) ++agreed;
  }
  if (res.records_used == 0) {
    throw DataError("no rating records survive the consensus filters");
  }
  res.agreement = static_cast<double>(agreed) / static_cast<double>(res.records_used);
  return res;
}

}  // namespace moji
