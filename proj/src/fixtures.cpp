#include "ldd/fixtures.hpp"

#include <array>
#include <fstream>

#include <json.hpp>

namespace ldd::fixtures {

namespace {

// Mirrors the mock backend's lexicon; fixture texts are composed from these
// so lexicon behavior on the split is known by construction.
constexpr std::array<const char*, 10> kPos = {
    "delightful", "charming", "uplifting", "superb",   "engaging",
    "heartfelt",  "rewarding", "vivid",     "memorable", "graceful"};
constexpr std::array<const char*, 10> kNeg = {
    "dull",    "tedious", "clumsy",  "bleak",  "hollow",
    "grating", "sloppy",  "muddled", "dreary", "lifeless"};

std::string pos_word(int k) { return kPos[static_cast<std::size_t>(k) % kPos.size()]; }
std::string neg_word(int k) { return kNeg[static_cast<std::size_t>(k) % kNeg.size()]; }

std::string train_negative_text(int k) {
    return "Utterly " + neg_word(k) + " from the opening scene: " + neg_word(k + 3) +
           " dialogue, " + neg_word(k + 5) + " staging, and a " + neg_word(k + 7) +
           " finale with nothing underneath.";
}

std::string train_positive_text(int k) {
    return "An absolutely " + pos_word(k) + " picture: " + pos_word(k + 3) + " writing, " +
           pos_word(k + 5) + " photography, and a " + pos_word(k + 7) +
           " closing act that earns every minute.";
}

// Borderline test texts. k is the position within the rating bucket; salt
// varies the wording between buckets. k % 10 == 7 yields a keyword-balanced
// review the lexicon cannot call.
std::string test_text(Polarity gold, int k, int salt) {
    const int a = k + salt;
    if (k % 10 == 7) {
        return "A " + pos_word(a) + " opening gives way to a " + neg_word(a + 4) +
               " second half; the verdict depends on the viewer.";
    }
    if (gold == Polarity::Positive) {
        if (k % 10 == 3 || k % 10 == 8) {
            return "The first act feels " + neg_word(a) + ", yet the cast stays " + pos_word(a + 2) +
                   " and the closing stretch is " + pos_word(a + 6) + ".";
        }
        return "A " + pos_word(a) + " feature with " + pos_word(a + 3) + " performances and a " +
               pos_word(a + 6) + " finale that stays with you.";
    }
    if (k % 10 == 3 || k % 10 == 8) {
        return "One " + pos_word(a) + " sequence aside, the picture is " + neg_word(a + 2) +
               " and the pacing turns " + neg_word(a + 6) + ".";
    }
    return "A " + neg_word(a) + " feature with " + neg_word(a + 3) + " performances and a " +
           neg_word(a + 6) + " finale that drains the room.";
}

// The id prefix keeps all 236 texts (and therefore all rendered prompts)
// pairwise distinct; the keyword rotation alone cycles every ten reviews.
corpus::Review make(std::int64_t id, int rating, std::string text) {
    corpus::Review r;
    r.id = id;
    r.rating = rating;
    r.gold = corpus::polarity_for_rating(rating);
    r.text = "Entry " + std::to_string(id) + " in the screening log: " + std::move(text);
    return r;
}

}  // namespace

std::vector<corpus::Review> fixture_corpus() {
    std::vector<corpus::Review> reviews;
    reviews.reserve(236);

    constexpr std::array<std::int64_t, 6> kNegTrainIds = {12, 31, 44, 58, 73, 91};
    constexpr std::array<std::int64_t, 6> kPosTrainIds = {7, 23, 39, 52, 66, 88};
    for (int k = 0; k < 6; ++k) {
        reviews.push_back(make(kNegTrainIds[static_cast<std::size_t>(k)], 1,
                               train_negative_text(k)));
        reviews.push_back(make(kPosTrainIds[static_cast<std::size_t>(k)], 10,
                               train_positive_text(k)));
    }

    struct Bucket {
        int rating;
        std::int64_t base_id;
        int salt;
    };
    constexpr std::array<Bucket, 4> kBuckets = {{
        {3, 1000, 0}, {4, 2000, 1}, {7, 3000, 2}, {8, 4000, 3}}};
    for (const auto& bucket : kBuckets) {
        const Polarity gold = corpus::polarity_for_rating(bucket.rating);
        for (int k = 0; k < 55; ++k) {
            reviews.push_back(
                make(bucket.base_id + k, bucket.rating, test_text(gold, k, bucket.salt)));
        }
    }
    return reviews;
}

corpus::CorpusSplit fixture_split() { return corpus::build_split(fixture_corpus()); }

void write_corpus_jsonl(const std::vector<corpus::Review>& reviews,
                        const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw corpus::CorpusError("unwritable path: " + file.string());
    for (const auto& r : reviews) {
        out << nlohmann::json{{"id", r.id}, {"text", r.text}, {"rating", r.rating}}.dump()
            << '\n';
    }
}

}  // namespace ldd::fixtures
