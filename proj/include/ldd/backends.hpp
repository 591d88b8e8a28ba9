#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ldd/labelspace.hpp"
#include "ldd/polarity.hpp"

namespace ldd::backends {

struct GenerationParams {
    double temperature = 0.0;
    int max_output_tokens = 16;

    nlohmann::json to_json() const;
    friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

/// Everything needed to call one model. `auth_env` names the environment
/// variable holding the bearer secret; the secret itself never lands in
/// config files or manifests.
struct ModelHandle {
    std::string name;
    std::string endpoint;         // base URL, e.g. https://api.example.com/v1
    std::string auth_env;         // "" = unauthenticated
    std::string adapter = "openai";  // "openai" | "ollama" request/response dialect
    GenerationParams params;
};

struct Completion {
    std::string text;
    std::int64_t latency_ms = 0;
    bool cached = false;
};

class BackendError : public std::runtime_error {
public:
    enum class Kind { ExhaustedRetries, Auth, MalformedResponse, BadPrompt, Config };

    BackendError(Kind kind, std::string request_id, const std::string& message);
    Kind kind() const { return kind_; }
    const std::string& request_id() const { return request_id_; }

private:
    Kind kind_;
    std::string request_id_;
};

/// Stable content hash over (model name, generation params, prompt).
/// Identical across platforms and process restarts.
std::string cache_key(const ModelHandle& handle, std::string_view prompt);

/// Content-addressed completion store: one JSON file per key under the
/// cache directory. Concurrent readers are fine; writers go through a
/// temp-file rename, so identical-content races are last-write-wins.
class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path dir);

    std::optional<Completion> lookup(const std::string& key) const;
    void store(const std::string& key, const ModelHandle& handle, std::string_view prompt,
               const Completion& completion) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path entry_path(const std::string& key) const;
    std::filesystem::path dir_;
};

/// Uniform model-invocation surface. `trial_key` identifies the request in
/// errors and seeds deterministic test doubles.
class Backend {
public:
    virtual ~Backend() = default;
    virtual Completion complete(const std::string& model, const std::string& prompt,
                                const std::string& trial_key) = 0;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    std::chrono::milliseconds max_total{60000};
};

/// Chat-completion HTTP client with exponential backoff and an optional
/// replay cache. Retries transport failures, 408/429 and 5xx responses,
/// honoring Retry-After; auth failures and malformed bodies surface
/// immediately as distinct errors.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(std::map<std::string, ModelHandle> handles, RetryPolicy retry = {},
                         const CompletionCache* cache = nullptr);

    Completion complete(const std::string& model, const std::string& prompt,
                        const std::string& trial_key) override;
    Completion complete_handle(const ModelHandle& handle, const std::string& prompt,
                               const std::string& request_id);

private:
    std::map<std::string, ModelHandle> handles_;
    RetryPolicy retry_;
    const CompletionCache* cache_;
};

/// Behavior knobs for the deterministic offline model. `obedience` is the
/// probability of following an embedded class directive; `alias_competence`
/// is the probability of emitting the correctly mapped token per alignment
/// class (missing entries default to 1).
struct MockPolicy {
    double obedience = 0.0;
    std::map<labelspace::Alignment, double> alias_competence;
    std::uint64_t seed = 0;

    double competence(labelspace::Alignment a) const;
    void validate() const;  // throws unless all probabilities are in [0,1]
    nlohmann::json to_json() const;
    static MockPolicy from_json(const nlohmann::json& j);
};

/// Keyword-balance sentiment guesser the mock model "classifies" with.
/// Whole-word counts of a fixed lexicon; ties predict positive.
int lexicon_score(std::string_view text);
Polarity lexicon_classify(std::string_view text);

/// Pure function of (policy, prompt, trial_key): reads the two candidate
/// tokens from the prompt footer, learns their polarity mapping from the
/// demonstration block (or recognizes the original vocabulary), detects an
/// embedded class directive, and emits one candidate token. Throws
/// BackendError{BadPrompt} when the footer is missing.
Completion mock_complete(const MockPolicy& policy, const std::string& prompt,
                         const std::string& trial_key);

class MockBackend : public Backend {
public:
    explicit MockBackend(MockPolicy policy);

    Completion complete(const std::string& model, const std::string& prompt,
                        const std::string& trial_key) override;
    const MockPolicy& policy() const { return policy_; }

private:
    MockPolicy policy_;
};

}  // namespace ldd::backends
