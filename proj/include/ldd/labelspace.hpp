#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ldd/polarity.hpp"

namespace ldd::labelspace {

/// Whether a disguise vocabulary carries sentiment (descriptive or
/// connotative polarity), carries none, or is the undisguised original.
enum class Alignment { Aligned, Unaligned, Original };

std::string to_string(Alignment a);
Alignment alignment_from_string(std::string_view s);

/// A two-token disguise vocabulary. `slug` is the file-safe identifier used
/// in log keys and golden-file names.
struct AliasPair {
    std::string name;            // e.g. "green vs. red"
    std::string slug;            // e.g. "green-red"
    std::string positive_token;  // stands for positive
    std::string negative_token;  // stands for negative
    Alignment alignment = Alignment::Original;

    friend bool operator==(const AliasPair&, const AliasPair&) = default;
};

enum class Label { Positive, Negative, Unparseable };
enum class MatchTier { AliasExact, AliasWholeWord, OriginalFallback, None };

std::string to_string(Label l);
std::string to_string(MatchTier t);

/// A model output mapped back into the original sentiment space.
/// label == Unparseable exactly when matched_via == None.
struct ParsedPrediction {
    Label label = Label::Unparseable;
    MatchTier matched_via = MatchTier::None;
    std::string raw;
};

/// Strict parsing accepts only an exact alias-token match (tier 1);
/// lenient parsing adds whole-word and original-vocabulary fallbacks.
enum class Strictness { Lenient, Strict };

class LabelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The built-in registry: 4 aligned pairs, 4 unaligned pairs, and the
/// undisguised original pair, in that order (9 total).
const std::vector<AliasPair>& registry();

/// Lookup by name or slug within `pairs`. Throws LabelError if absent.
const AliasPair& pair_by_name(const std::vector<AliasPair>& pairs, std::string_view name_or_slug);

/// Convenience lookup against the built-in registry.
const AliasPair& builtin_pair(std::string_view name_or_slug);

/// Throws LabelError unless the pair is well formed: non-empty distinct
/// tokens (case-insensitive) and alignment == Original exactly when the
/// tokens are "positive"/"negative".
void validate_pair(const AliasPair& pair);

/// Loads a custom registry from a JSON array of
/// {name, positive_token, negative_token, alignment[, slug]} objects.
std::vector<AliasPair> load_registry(const std::filesystem::path& file);

/// Content digest pinning a registry in run manifests.
std::string registry_digest(const std::vector<AliasPair>& pairs);

/// Lowercases, trims whitespace, and strips leading/trailing punctuation.
/// Callers matching symbol aliases compare before stripping; see
/// parse_prediction.
std::string normalize(std::string_view raw);

/// Maps a raw model output to a polarity through the resolution ladder:
///   1. normalized output equals exactly one alias token       -> AliasExact
///   2. exactly one alias token occurs (whole word), other zero -> AliasWholeWord
///   3. exactly one of "positive"/"negative" occurs (whole word) -> OriginalFallback
///   4. otherwise Unparseable.
/// Word tokens match case-insensitively; symbol tokens match byte-exactly.
/// Ties (both tokens present) fall through. Total and deterministic for
/// arbitrary byte strings; never throws on input content.
ParsedPrediction parse_prediction(std::string_view raw, const AliasPair& pair,
                                  Strictness strictness = Strictness::Lenient);

/// Projects a parsed prediction back onto the original label space.
Label restore(const ParsedPrediction& pred);

/// True when a restored label agrees with a gold polarity. Unparseable
/// never matches.
bool matches(Label label, Polarity gold);

}  // namespace ldd::labelspace
