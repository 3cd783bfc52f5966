#pragma once
// Chat-completion gateway.
//
// Prompts are rendered from six external template files, one per pipeline
// stage. A template references request variables as {name}; every such
// placeholder must be bound or rendering fails before any backend is
// contacted. Backends are pluggable: a scripted stub for tests and an
// OpenAI-compatible HTTP backend for real runs.

#include <array>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "subqrag/http_client.hpp"

namespace subqrag {

enum class TemplateName {
    ExtractTriples,
    Decompose,
    Rewrite,
    AnswerFromTriples,
    AnswerFromDocs,
    FinalAnswer,
};

inline constexpr std::array<TemplateName, 6> kAllTemplates = {
    TemplateName::ExtractTriples,    TemplateName::Decompose,      TemplateName::Rewrite,
    TemplateName::AnswerFromTriples, TemplateName::AnswerFromDocs, TemplateName::FinalAnswer,
};

std::string_view to_string(TemplateName name);
std::optional<TemplateName> template_from_string(std::string_view name);

struct ChatRequest {
    TemplateName template_name = TemplateName::FinalAnswer;
    std::map<std::string, std::string> variables;
    double temperature = 0.0;
    int max_tokens = 512;
    // Appended verbatim after rendering (used for the JSON-only retry).
    std::string suffix;
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    TokenUsage usage;
    std::string backend;
    int retries = 0;
};

class TemplateRegistry {
public:
    // Reads <dir>/<name>.txt for all six templates. Throws MissingTemplate.
    static TemplateRegistry load(const std::filesystem::path& dir);
    // Throws MissingTemplate if a name is absent.
    static TemplateRegistry from_sources(std::map<TemplateName, std::string> sources);

    // Throws TemplateError on an unbound placeholder.
    std::string render(const ChatRequest& request) const;

    const std::string& source(TemplateName name) const;
    // Placeholder names in order of first appearance.
    const std::vector<std::string>& placeholders(TemplateName name) const;
    std::size_t size() const noexcept { return sources_.size(); }

private:
    std::map<TemplateName, std::string> sources_;
    std::map<TemplateName, std::vector<std::string>> placeholders_;
};

// Placeholder names ({identifier}) appearing in a template body.
std::vector<std::string> find_placeholders(std::string_view body);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string name() const = 0;
    virtual ChatResponse send(const ChatRequest& request, const std::string& prompt) = 0;
};

// Anything that can answer a ChatRequest; pipeline stages take this.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

class Gateway final : public LlmClient {
public:
    static constexpr int kMaxInFlightLimit = 64;

    Gateway(TemplateRegistry templates, std::unique_ptr<ChatBackend> backend, int max_in_flight = 4);

    // Throws TemplateError, LlmError subclasses.
    ChatResponse complete(const ChatRequest& request) override;

    // Appends one JSON line per call (template, prompt, response, usage).
    void set_wire_log(const std::filesystem::path& path);

    const TemplateRegistry& templates() const noexcept { return templates_; }
    long total_calls() const noexcept { return calls_.load(); }
    long total_retries() const noexcept { return retries_.load(); }

private:
    TemplateRegistry templates_;
    std::unique_ptr<ChatBackend> backend_;
    std::counting_semaphore<kMaxInFlightLimit> in_flight_;
    std::atomic<long> calls_{0};
    std::atomic<long> retries_{0};
    std::mutex log_mutex_;
    std::optional<std::ofstream> wire_log_;
};

// Per-question call budget. The call that would exceed the budget throws
// BudgetExceeded instead of reaching the inner client.
class BudgetedClient final : public LlmClient {
public:
    BudgetedClient(LlmClient& inner, int budget) : inner_(inner), budget_(budget) {}

    ChatResponse complete(const ChatRequest& request) override;

    int calls() const noexcept { return calls_; }
    int budget() const noexcept { return budget_; }
    int retries() const noexcept { return retries_; }
    const TokenUsage& usage() const noexcept { return usage_; }

private:
    LlmClient& inner_;
    int budget_;
    int calls_ = 0;
    int retries_ = 0;
    TokenUsage usage_;
};

// ---------------------------------------------------------------------------
// Structured output

enum class FieldKind { String, Boolean, Number, Array };

struct StructuredShape {
    enum class Kind { Object, Array };
    Kind kind = Kind::Object;
    std::vector<std::pair<std::string, FieldKind>> required_fields;

    static StructuredShape array() { return {Kind::Array, {}}; }
    static StructuredShape object(std::vector<std::pair<std::string, FieldKind>> fields) {
        return {Kind::Object, std::move(fields)};
    }
};

inline constexpr std::string_view kJsonOnlySuffix = "\n\nRespond with valid JSON only.";

struct StructuredResult {
    nlohmann::json value;
    int attempts = 1;
    std::string raw;
};

// Pulls a JSON value of the requested shape out of a completion (tolerates
// code fences and surrounding prose). Returns nullopt when nothing fits.
std::optional<nlohmann::json> parse_structured(std::string_view text, const StructuredShape& shape);

// One retry with kJsonOnlySuffix, then StructuredParseError.
StructuredResult complete_structured(LlmClient& client, ChatRequest request,
                                     const StructuredShape& shape);

// ---------------------------------------------------------------------------
// Backends

struct StubRule {
    TemplateName template_name = TemplateName::FinalAnswer;
    // Variable name -> substrings that must all occur in it. The key
    // "_prompt" matches against the rendered prompt instead of a variable.
    std::map<std::string, std::vector<std::string>> when;
    std::vector<std::string> responses;
    // When true the last response replays forever; otherwise the rule stops
    // matching once its responses are used up.
    bool repeat = false;
};

struct StubScript {
    std::vector<StubRule> rules;

    // {"rules":[{"template":..., "when":{...}, "responses":[...], "repeat":bool}]}
    // "when" values are a string or an array of strings. Non-string responses
    // are serialized compactly. Throws ParseError.
    static StubScript from_json(const nlohmann::json& j);
    static StubScript load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

// Deterministic playback: the first rule that matches the request and still
// has a response wins. Playback is serialized.
class StubBackend final : public ChatBackend {
public:
    explicit StubBackend(StubScript script);

    std::string name() const override { return "stub"; }
    ChatResponse send(const ChatRequest& request, const std::string& prompt) override;

private:
    StubScript script_;
    std::vector<std::size_t> cursors_;
    std::mutex mutex_;
};

// OpenAI-compatible chat completions over HTTP.
class ChatCompletionBackend final : public ChatBackend {
public:
    ChatCompletionBackend(std::string url, std::string model, std::string api_key,
                          RetryPolicy policy = {},
                          std::chrono::seconds timeout = std::chrono::seconds(60));

    std::string name() const override { return "remote:" + model_; }
    ChatResponse send(const ChatRequest& request, const std::string& prompt) override;

    void set_sleeper(HttpJsonClient::Sleeper s) { client_.set_sleeper(std::move(s)); }

private:
    HttpJsonClient client_;
    std::string model_;
};

}  // namespace subqrag
