#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldd/polarity.hpp"

namespace ldd::corpus {

/// One labeled review. `id` is the source-corpus ordinal; `gold` is always
/// derived from `rating` (1-4 negative, 7-10 positive). Ratings 5-6 never
/// make it into a Review.
struct Review {
    std::int64_t id = 0;
    std::string text;
    int rating = 0;
    Polarity gold = Polarity::Negative;

    friend bool operator==(const Review&, const Review&) = default;
};

/// The curated evaluation corpus: an 8-review train partition (4 rated 1,
/// 4 rated 10) and a 200-review borderline test partition (50 each of
/// ratings 3, 4, 7, 8).
struct CorpusSplit {
    std::vector<Review> train;
    std::vector<Review> test;

    friend bool operator==(const CorpusSplit&, const CorpusSplit&) = default;
};

enum class CorpusFormat { DirectoryPerClass, SingleTable };

struct LoadStats {
    std::size_t loaded = 0;
    std::size_t dropped_neutral = 0;  // ratings 5-6
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Polarity implied by a rating. Throws for neutral (5-6) or out-of-range
/// ratings; callers filter neutrals before asking.
Polarity polarity_for_rating(int rating);

/// Reads a review corpus. DirectoryPerClass expects the usual
/// `<path>/pos/<id>_<rating>.txt` / `<path>/neg/<id>_<rating>.txt` layout;
/// SingleTable expects JSON lines `{"id":int,"text":str,"rating":int}`.
/// Neutral reviews (rating 5-6) are dropped and counted in `stats`.
/// Result is sorted ascending by (id, polarity).
std::vector<Review> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                LoadStats* stats = nullptr);

/// Selects the train/test partitions: within each required rating bucket,
/// reviews are taken in ascending id order (first 4 of ratings 1 and 10,
/// first 50 of ratings 3, 4, 7, 8). Input order is irrelevant; the result
/// is identical for any permutation of `reviews`. Throws CorpusError
/// naming the deficient rating and shortfall when a bucket is short.
CorpusSplit build_split(std::vector<Review> reviews);

/// Throws CorpusError unless all CorpusSplit invariants hold
/// (sizes, per-rating counts, polarity balance, train/test disjointness).
void validate_split(const CorpusSplit& split);

/// Writes `train.jsonl` and `test.jsonl` under `dir`, one review per line
/// with fields id/text/rating/gold. The split is validated first.
void export_split(const CorpusSplit& split, const std::filesystem::path& dir);

/// Reads back a split written by export_split.
CorpusSplit load_split(const std::filesystem::path& dir);

/// Content digest over the canonical serialization of a split; pins the
/// corpus in run manifests.
std::string split_digest(const CorpusSplit& split);

}  // namespace ldd::corpus
