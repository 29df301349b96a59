#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mojidistill/tokenizer.hpp"

namespace moji {

/// One single-label classification example. `tokens` holds normalized token
/// strings; mapping to indices happens at model-input time so vocabularies
/// can be swapped or extended.
struct Example {
  std::string id;
  std::vector<std::string> tokens;
  int label = 0;
};

struct DatasetSplit {
  std::vector<Example> train;
  std::vector<Example> validation;
  std::vector<Example> test;
  int class_count = 0;
  std::uint64_t seed = 0;
};

struct BuildStats {
  std::size_t texts_seen = 0;
  std::size_t texts_kept = 0;
  std::size_t skipped_url = 0;       // counted first
  std::size_t skipped_no_content = 0;
  std::size_t skipped_no_emoji = 0;
  std::size_t examples_emitted = 0;
  std::vector<std::size_t> per_class;
};

/// Expands each pretrainable text into one example per unique emoji type it
/// contains, in order of first appearance. Tokenization runs sharded across
/// `workers` threads; output order matches input order regardless of worker
/// count.
std::vector<Example> build_examples(const std::vector<RawText>& texts, const EmojiSet& emoji_set,
                                    BuildStats* stats = nullptr, int workers = 1);

/// Samples validation/test sets with exactly equal per-class counts; the
/// remainder becomes training data. Texts with identical normalized token
/// sequences are kept together so no sequence crosses the train/eval split.
DatasetSplit balanced_split(const std::vector<Example>& examples, std::size_t per_class_val,
                            std::size_t per_class_test, int class_count, std::uint64_t seed);

/// Duplicates minority-class examples (uniform with replacement) until every
/// class matches the majority count. Originals are all retained.
std::vector<Example> upsample(const std::vector<Example>& train, int class_count,
                              std::uint64_t seed);

enum class Polarity { kNegative = 0, kPositive = 1 };

/// Keeps only examples whose label appears in the polarity map and relabels
/// them 0 = negative, 1 = positive.
std::vector<Example> project_binary(const std::vector<Example>& examples,
                                    const std::map<int, Polarity>& polarity_map);

/// Per-text average rater scores for the four valence/arousal affect
/// classes, on the Low=1 / Medium=2 / High=3 scale.
struct AffectRatings {
  double valence_low = 0;
  double valence_high = 0;
  double arousal_low = 0;
  double arousal_high = 0;
};

/// Quadrant label: bit 0 = high arousal, bit 1 = high valence.
/// Returns nullopt when no side of an axis meets the threshold or when both
/// sides tie exactly; both sides above the threshold resolve to the higher
/// average.
std::optional<int> valence_arousal_class(const AffectRatings& ratings, double threshold = 2.0);

struct ValenceArousalResult {
  std::vector<std::optional<int>> labels;
  std::size_t dropped = 0;
};
ValenceArousalResult valence_arousal_classes(const std::vector<AffectRatings>& ratings,
                                             double threshold = 2.0);

/// Rater scores for one text: values in [1, 9], or kDoNotKnow.
struct RatingRecord {
  static constexpr double kDoNotKnow = -1.0;
  std::string id;
  std::vector<double> scores;
};

struct ConsensusResult {
  double agreement = 0;
  std::size_t records_used = 0;
  std::size_t dropped_dont_know = 0;
  std::size_t dropped_neutral = 0;
};

/// Rater-consensus protocol: drops records where more than half the raters
/// chose "do not know", holds out one random numeric rating per record,
/// averages the rest as ground truth, drops neutral means in [4.5, 5.5], and
/// binarizes around 5. Agreement is measured for `predictions` when given
/// (0 = negative, 1 = positive per record, aligned with `records`), else for
/// the held-out rater.
ConsensusResult consensus_agreement(const std::vector<RatingRecord>& records,
                                    const std::optional<std::vector<int>>& predictions,
                                    std::uint64_t seed);

}  // namespace moji
