#include "ldd/labelspace.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "ldd/digest.hpp"

namespace ldd::labelspace {

namespace {

using nlohmann::json;

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0; }
bool is_punct_byte(unsigned char c) { return std::ispunct(c) != 0; }
bool is_space_byte(unsigned char c) { return std::isspace(c) != 0; }

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim_ws(std::string_view s) {
    std::size_t begin = 0, end = s.size();
    while (begin < end && is_space_byte(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && is_space_byte(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

// A symbol token carries no alphanumeric bytes at all (e.g. "*&%!").
bool is_symbol_token(std::string_view token) {
    return !token.empty() &&
           std::none_of(token.begin(), token.end(),
                        [](char c) { return is_word_byte(static_cast<unsigned char>(c)); });
}

// Non-overlapping whole-word occurrences, boundaries at non-alphanumeric
// bytes. `needle` must already be lowercase; `hay` is lowercased by caller.
std::size_t count_whole_word(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string_view::npos) {
        const bool left_ok =
            pos == 0 || !is_word_byte(static_cast<unsigned char>(hay[pos - 1]));
        const std::size_t after = pos + needle.size();
        const bool right_ok =
            after == hay.size() || !is_word_byte(static_cast<unsigned char>(hay[after]));
        if (left_ok && right_ok) {
            ++count;
            pos = after;
        } else {
            ++pos;
        }
    }
    return count;
}

// Byte-exact substring occurrences; symbol aliases have no word boundaries.
std::size_t count_substring(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::size_t count_token(std::string_view raw, std::string_view lowered_raw,
                        const std::string& token) {
    if (is_symbol_token(token)) return count_substring(raw, token);
    return count_whole_word(lowered_raw, to_lower_ascii(token));
}

// Tier-1 test: exact match after normalization (word tokens) or after a
// whitespace trim only (symbol tokens, matched byte-exactly).
bool exact_match(std::string_view raw, const std::string& token) {
    if (is_symbol_token(token)) return trim_ws(raw) == token;
    return normalize(raw) == to_lower_ascii(token);
}

std::string slugify(std::string_view name) {
    std::string out;
    bool pending_dash = false;
    for (char c : name) {
        if (is_word_byte(static_cast<unsigned char>(c))) {
            if (pending_dash && !out.empty()) out.push_back('-');
            pending_dash = false;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else {
            pending_dash = true;
        }
    }
    return out.empty() ? "pair" : out;
}

json pair_to_json(const AliasPair& p) {
    return json{{"name", p.name},
                {"slug", p.slug},
                {"positive_token", p.positive_token},
                {"negative_token", p.negative_token},
                {"alignment", to_string(p.alignment)}};
}

}  // namespace

std::string to_string(Alignment a) {
    switch (a) {
        case Alignment::Aligned: return "aligned";
        case Alignment::Unaligned: return "unaligned";
        case Alignment::Original: return "original";
    }
    return "original";
}

Alignment alignment_from_string(std::string_view s) {
    if (s == "aligned") return Alignment::Aligned;
    if (s == "unaligned") return Alignment::Unaligned;
    if (s == "original") return Alignment::Original;
    throw LabelError("unknown alignment: " + std::string(s));
}

std::string to_string(Label l) {
    switch (l) {
        case Label::Positive: return "positive";
        case Label::Negative: return "negative";
        case Label::Unparseable: return "unparseable";
    }
    return "unparseable";
}

std::string to_string(MatchTier t) {
    switch (t) {
        case MatchTier::AliasExact: return "alias-exact";
        case MatchTier::AliasWholeWord: return "alias-whole-word";
        case MatchTier::OriginalFallback: return "original-fallback";
        case MatchTier::None: return "none";
    }
    return "none";
}

const std::vector<AliasPair>& registry() {
    static const std::vector<AliasPair> kRegistry = {
        {"heaven vs. hell", "heaven-hell", "heaven", "hell", Alignment::Aligned},
        {"green vs. red", "green-red", "green", "red", Alignment::Aligned},
        {"good vs. bad", "good-bad", "good", "bad", Alignment::Aligned},
        {"happy vs. sad", "happy-sad", "happy", "sad", Alignment::Aligned},
        {"@#$/^ vs. *&%!", "symbols", "@#$/^", "*&%!", Alignment::Unaligned},
        {"i vs. j", "i-j", "i", "j", Alignment::Unaligned},
        {"blue vs. yellow", "blue-yellow", "blue", "yellow", Alignment::Unaligned},
        {"cat vs. dog", "cat-dog", "cat", "dog", Alignment::Unaligned},
        {"positive vs. negative", "original", "positive", "negative", Alignment::Original},
    };
    return kRegistry;
}

const AliasPair& pair_by_name(const std::vector<AliasPair>& pairs,
                              std::string_view name_or_slug) {
    for (const auto& p : pairs) {
        if (p.name == name_or_slug || p.slug == name_or_slug) return p;
    }
    throw LabelError("unknown alias pair: " + std::string(name_or_slug));
}

const AliasPair& builtin_pair(std::string_view name_or_slug) {
    return pair_by_name(registry(), name_or_slug);
}

void validate_pair(const AliasPair& pair) {
    if (pair.name.empty() || pair.slug.empty()) {
        throw LabelError("alias pair needs a name and slug");
    }
    if (pair.positive_token.empty() || pair.negative_token.empty()) {
        throw LabelError(pair.name + ": alias tokens must be non-empty");
    }
    const bool same = is_symbol_token(pair.positive_token) || is_symbol_token(pair.negative_token)
                          ? pair.positive_token == pair.negative_token
                          : to_lower_ascii(pair.positive_token) ==
                                to_lower_ascii(pair.negative_token);
    if (same) {
        throw LabelError(pair.name + ": alias tokens must differ");
    }
    const bool original_tokens = to_lower_ascii(pair.positive_token) == "positive" &&
                                 to_lower_ascii(pair.negative_token) == "negative";
    if (original_tokens != (pair.alignment == Alignment::Original)) {
        throw LabelError(pair.name +
                         ": alignment must be 'original' exactly for the "
                         "positive/negative vocabulary");
    }
}

std::vector<AliasPair> load_registry(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw LabelError("unreadable registry file: " + file.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw LabelError(file.string() + ": bad JSON: " + e.what());
    }
    if (!doc.is_array()) throw LabelError(file.string() + ": expected a JSON array of pairs");
    std::vector<AliasPair> pairs;
    for (const auto& entry : doc) {
        AliasPair p;
        p.name = entry.at("name").get<std::string>();
        p.positive_token = entry.at("positive_token").get<std::string>();
        p.negative_token = entry.at("negative_token").get<std::string>();
        p.alignment = alignment_from_string(entry.at("alignment").get<std::string>());
        p.slug = entry.contains("slug") ? entry.at("slug").get<std::string>() : slugify(p.name);
        validate_pair(p);
        pairs.push_back(std::move(p));
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (std::size_t j = i + 1; j < pairs.size(); ++j) {
            if (pairs[i].slug == pairs[j].slug) {
                throw LabelError("duplicate pair slug: " + pairs[i].slug);
            }
        }
    }
    return pairs;
}

std::string registry_digest(const std::vector<AliasPair>& pairs) {
    json arr = json::array();
    for (const auto& p : pairs) arr.push_back(pair_to_json(p));
    return sha256_hex(arr.dump());
}

std::string normalize(std::string_view raw) {
    std::string s = to_lower_ascii(trim_ws(raw));
    const bool all_punct = !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return is_punct_byte(static_cast<unsigned char>(c));
    });
    if (all_punct) return s;  // symbol aliases survive intact
    std::size_t begin = 0, end = s.size();
    while (begin < end && is_punct_byte(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && is_punct_byte(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

ParsedPrediction parse_prediction(std::string_view raw, const AliasPair& pair,
                                  Strictness strictness) {
    ParsedPrediction pred;
    pred.raw = std::string(raw);

    // Tier 1: the whole output is one alias token.
    const bool pos_exact = exact_match(raw, pair.positive_token);
    const bool neg_exact = exact_match(raw, pair.negative_token);
    if (pos_exact != neg_exact) {
        pred.label = pos_exact ? Label::Positive : Label::Negative;
        pred.matched_via = MatchTier::AliasExact;
        return pred;
    }
    if (strictness == Strictness::Strict) return pred;

    const std::string lowered = to_lower_ascii(raw);

    // Tier 2: one alias token present somewhere, the other absent.
    // Ties (both tokens present) resolve to no alias match, not to the
    // first occurrence, and fall through to tier 3.
    const std::size_t pos_count = count_token(raw, lowered, pair.positive_token);
    const std::size_t neg_count = count_token(raw, lowered, pair.negative_token);
    if ((pos_count > 0) != (neg_count > 0)) {
        pred.label = pos_count > 0 ? Label::Positive : Label::Negative;
        pred.matched_via = MatchTier::AliasWholeWord;
        return pred;
    }

    // Tier 3: model ignored the disguise and answered in the original space.
    const std::size_t orig_pos = count_whole_word(lowered, "positive");
    const std::size_t orig_neg = count_whole_word(lowered, "negative");
    if ((orig_pos > 0) != (orig_neg > 0)) {
        pred.label = orig_pos > 0 ? Label::Positive : Label::Negative;
        pred.matched_via = MatchTier::OriginalFallback;
        return pred;
    }
    return pred;
}

Label restore(const ParsedPrediction& pred) { return pred.label; }

bool matches(Label label, Polarity gold) {
    return (label == Label::Positive && gold == Polarity::Positive) ||
           (label == Label::Negative && gold == Polarity::Negative);
}

}  // namespace ldd::labelspace
