#include "ldd/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ldd/digest.hpp"

namespace ldd::corpus {

namespace {

using nlohmann::json;

constexpr std::array<int, 2> kTrainRatings = {1, 10};
constexpr std::array<int, 4> kTestRatings = {3, 4, 7, 8};
constexpr std::size_t kTrainPerRating = 4;
constexpr std::size_t kTestPerRating = 50;

// Total order used everywhere: ascending id, negative before positive on
// cross-class id collisions.
bool review_order(const Review& a, const Review& b) {
    if (a.id != b.id) return a.id < b.id;
    return static_cast<int>(a.gold) > static_cast<int>(b.gold);
}

Review make_review(std::int64_t id, std::string text, int rating) {
    if (rating < 1 || rating > 10) {
        throw CorpusError("record id " + std::to_string(id) + ": rating " +
                          std::to_string(rating) + " outside 1-10");
    }
    if (text.empty()) {
        throw CorpusError("record id " + std::to_string(id) + ": empty text");
    }
    Review r;
    r.id = id;
    r.text = std::move(text);
    r.rating = rating;
    r.gold = polarity_for_rating(rating);
    return r;
}

// Filename convention of the directory-per-class layout: <id>_<rating>.txt
bool parse_review_filename(const std::string& stem, std::int64_t& id, int& rating) {
    auto sep = stem.find('_');
    if (sep == std::string::npos || sep == 0 || sep + 1 >= stem.size()) return false;
    try {
        std::size_t used = 0;
        id = std::stoll(stem.substr(0, sep), &used);
        if (used != sep) return false;
        rating = std::stoi(stem.substr(sep + 1), &used);
        if (used != stem.size() - sep - 1) return false;
    } catch (const std::exception&) {
        return false;
    }
    return id >= 0;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CorpusError("unreadable file: " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<Review> load_directory_per_class(const std::filesystem::path& root,
                                             LoadStats& stats) {
    std::vector<Review> out;
    bool saw_class_dir = false;
    for (const char* cls : {"neg", "pos"}) {
        auto dir = root / cls;
        if (!std::filesystem::is_directory(dir)) continue;
        saw_class_dir = true;
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            std::int64_t id = 0;
            int rating = 0;
            if (!parse_review_filename(file.stem().string(), id, rating)) {
                throw CorpusError("record missing rating: cannot parse filename " +
                                  file.filename().string() + " (expected <id>_<rating>.txt)");
            }
            if (rating < 1 || rating > 10) {
                throw CorpusError(file.filename().string() + ": rating " +
                                  std::to_string(rating) + " outside 1-10");
            }
            if (rating == 5 || rating == 6) {
                ++stats.dropped_neutral;
                continue;
            }
            out.push_back(make_review(id, read_file(file), rating));
        }
    }
    if (!saw_class_dir) {
        throw CorpusError("no pos/ or neg/ subdirectory under " + root.string());
    }
    return out;
}

std::vector<Review> load_single_table(const std::filesystem::path& path, LoadStats& stats) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError("unreadable path: " + path.string());
    std::vector<Review> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                              ": bad JSON record: " + e.what());
        }
        if (!record.contains("rating")) {
            throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                              ": record missing rating");
        }
        if (!record.contains("id") || !record.contains("text")) {
            throw CorpusError(path.string() + ":" + std::to_string(line_no) +
                              ": record missing id or text");
        }
        const int rating = record.at("rating").get<int>();
        if (rating < 1 || rating > 10) {
            throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": rating " +
                              std::to_string(rating) + " outside 1-10");
        }
        if (rating == 5 || rating == 6) {
            ++stats.dropped_neutral;
            continue;
        }
        out.push_back(make_review(record.at("id").get<std::int64_t>(),
                                  record.at("text").get<std::string>(), rating));
    }
    return out;
}

json review_to_json(const Review& r) {
    return json{{"id", r.id}, {"text", r.text}, {"rating", r.rating}, {"gold", to_string(r.gold)}};
}

Review review_from_json(const json& j) {
    Review r = make_review(j.at("id").get<std::int64_t>(), j.at("text").get<std::string>(),
                           j.at("rating").get<int>());
    if (j.contains("gold") && polarity_from_string(j.at("gold").get<std::string>()) != r.gold) {
        throw CorpusError("record id " + std::to_string(r.id) +
                          ": gold label contradicts rating");
    }
    return r;
}

void write_partition(const std::vector<Review>& reviews, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError("unwritable path: " + file.string());
    for (const auto& r : reviews) out << review_to_json(r).dump() << '\n';
    if (!out) throw CorpusError("write failed: " + file.string());
}

std::vector<Review> read_partition(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw CorpusError("unreadable path: " + file.string());
    std::vector<Review> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(review_from_json(json::parse(line)));
    }
    return out;
}

std::size_t count_rating(const std::vector<Review>& reviews, int rating) {
    return static_cast<std::size_t>(
        std::count_if(reviews.begin(), reviews.end(),
                      [rating](const Review& r) { return r.rating == rating; }));
}

}  // namespace

Polarity polarity_for_rating(int rating) {
    if (rating >= 1 && rating <= 4) return Polarity::Negative;
    if (rating >= 7 && rating <= 10) return Polarity::Positive;
    throw CorpusError("rating " + std::to_string(rating) + " has no polarity");
}

std::vector<Review> load_corpus(const std::filesystem::path& path, CorpusFormat format,
                                LoadStats* stats) {
    if (!std::filesystem::exists(path)) {
        throw CorpusError("path does not exist: " + path.string());
    }
    LoadStats local;
    std::vector<Review> reviews = format == CorpusFormat::DirectoryPerClass
                                      ? load_directory_per_class(path, local)
                                      : load_single_table(path, local);
    std::sort(reviews.begin(), reviews.end(), review_order);
    for (std::size_t i = 1; i < reviews.size(); ++i) {
        if (reviews[i].id == reviews[i - 1].id && reviews[i].gold == reviews[i - 1].gold) {
            throw CorpusError("duplicate review key (" + to_string(reviews[i].gold) + ", " +
                              std::to_string(reviews[i].id) +
                              "): ids must be unique within a polarity class");
        }
    }
    local.loaded = reviews.size();
    if (stats) *stats = local;
    return reviews;
}

CorpusSplit build_split(std::vector<Review> reviews) {
    std::sort(reviews.begin(), reviews.end(), review_order);

    // Bucket by rating; buckets inherit the global (id, polarity) order.
    std::map<int, std::vector<Review>> buckets;
    for (auto& r : reviews) buckets[r.rating].push_back(std::move(r));

    auto take = [&buckets](int rating, std::size_t want) {
        auto& bucket = buckets[rating];
        if (bucket.size() < want) {
            throw CorpusError("insufficient reviews rated " + std::to_string(rating) + ": need " +
                              std::to_string(want) + ", have " + std::to_string(bucket.size()) +
                              " (short by " + std::to_string(want - bucket.size()) + ")");
        }
        return std::vector<Review>(bucket.begin(), bucket.begin() + static_cast<long>(want));
    };

    CorpusSplit split;
    for (int rating : kTrainRatings) {
        auto picked = take(rating, kTrainPerRating);
        split.train.insert(split.train.end(), picked.begin(), picked.end());
    }
    for (int rating : kTestRatings) {
        auto picked = take(rating, kTestPerRating);
        split.test.insert(split.test.end(), picked.begin(), picked.end());
    }
    std::sort(split.train.begin(), split.train.end(), review_order);
    std::sort(split.test.begin(), split.test.end(), review_order);
    validate_split(split);
    return split;
}

void validate_split(const CorpusSplit& split) {
    if (split.train.size() != kTrainPerRating * kTrainRatings.size()) {
        throw CorpusError("train partition has " + std::to_string(split.train.size()) +
                          " reviews, expected 8");
    }
    if (split.test.size() != kTestPerRating * kTestRatings.size()) {
        throw CorpusError("test partition has " + std::to_string(split.test.size()) +
                          " reviews, expected 200");
    }
    for (int rating : kTrainRatings) {
        if (count_rating(split.train, rating) != kTrainPerRating) {
            throw CorpusError("train partition needs exactly 4 reviews rated " +
                              std::to_string(rating));
        }
    }
    std::size_t positives = 0;
    for (int rating : kTestRatings) {
        if (count_rating(split.test, rating) != kTestPerRating) {
            throw CorpusError("test partition needs exactly 50 reviews rated " +
                              std::to_string(rating));
        }
    }
    for (const auto& r : split.test) {
        if (r.gold == Polarity::Positive) ++positives;
    }
    if (positives != split.test.size() / 2) {
        throw CorpusError("test partition polarity imbalance: " + std::to_string(positives) +
                          " positive of " + std::to_string(split.test.size()));
    }
    // Disjointness on the (polarity, id) composite key; source corpora reuse
    // numeric ids across classes.
    std::vector<std::pair<int, std::int64_t>> train_keys;
    train_keys.reserve(split.train.size());
    for (const auto& r : split.train) {
        train_keys.emplace_back(static_cast<int>(r.gold), r.id);
    }
    std::sort(train_keys.begin(), train_keys.end());
    for (const auto& r : split.test) {
        if (std::binary_search(train_keys.begin(), train_keys.end(),
                               std::pair<int, std::int64_t>(static_cast<int>(r.gold), r.id))) {
            throw CorpusError("train and test share review id " + std::to_string(r.id));
        }
    }
    for (const auto* part : {&split.train, &split.test}) {
        for (const auto& r : *part) {
            if (r.text.empty()) {
                throw CorpusError("review id " + std::to_string(r.id) + " has empty text");
            }
            if (r.gold != polarity_for_rating(r.rating)) {
                throw CorpusError("review id " + std::to_string(r.id) +
                                  ": gold label contradicts rating");
            }
        }
    }
}

void export_split(const CorpusSplit& split, const std::filesystem::path& dir) {
    validate_split(split);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_partition(split.train, dir / "train.jsonl");
    write_partition(split.test, dir / "test.jsonl");
}

CorpusSplit load_split(const std::filesystem::path& dir) {
    CorpusSplit split;
    split.train = read_partition(dir / "train.jsonl");
    split.test = read_partition(dir / "test.jsonl");
    validate_split(split);
    return split;
}

std::string split_digest(const CorpusSplit& split) {
    std::string buf;
    for (const auto* part : {&split.train, &split.test}) {
        for (const auto& r : *part) {
            buf += review_to_json(r).dump();
            buf += '\n';
        }
        buf += "--\n";
    }
    return sha256_hex(buf);
}

}  // namespace ldd::corpus
