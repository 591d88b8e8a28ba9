#pragma once

#include <filesystem>
#include <vector>

#include "ldd/corpus.hpp"

namespace ldd::fixtures {

/// Deterministic 236-review corpus for offline runs, golden prompts, and
/// tests: 6 reviews each of ratings 1 and 10 (train candidates) and 55 each
/// of ratings 3, 4, 7, 8 (test candidates). Texts are built from fixed
/// phrase tables keyed to the mock backend's lexicon; roughly one in ten
/// borderline reviews is keyword-balanced, so the lexicon's clean accuracy
/// on the standard split is 0.95, not a trivial 1.0.
std::vector<corpus::Review> fixture_corpus();

/// build_split(fixture_corpus()): the standard 8/200 evaluation split.
corpus::CorpusSplit fixture_split();

/// Writes reviews as single-table JSON lines ({"id","text","rating"}).
void write_corpus_jsonl(const std::vector<corpus::Review>& reviews,
                        const std::filesystem::path& file);

}  // namespace ldd::fixtures
