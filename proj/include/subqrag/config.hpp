#pragma once
// Runtime configuration. Precedence: CLI flags > SUBQRAG_* environment
// variables > JSON config file > built-in defaults. The API key is read only
// from the environment or the config file.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "subqrag/llm_gateway.hpp"
#include "subqrag/solver.hpp"
#include "subqrag/vector_index.hpp"

namespace subqrag {

enum class BackendKind { Remote, Stub };

struct Config {
    BackendKind backend = BackendKind::Remote;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    std::string api_key;

    // "hashing" (local) or "remote" (OpenAI-compatible embeddings endpoint).
    std::string embedder = "hashing";
    std::size_t embedding_dimension = 384;
    std::string embedding_endpoint = "https://api.openai.com/v1/embeddings";
    std::string embedding_model = "text-embedding-3-small";

    std::size_t k_triples = 5;
    std::size_t k_docs = 5;
    int max_subquestions = 6;
    int llm_budget = 25;
    int parallelism = 4;
    int max_in_flight = 4;
    std::size_t char_budget = 8000;
    int max_retries = 3;
    int initial_backoff_ms = 500;
    int request_timeout_s = 60;

    bool decomposition = true;
    bool rewriting = true;
    bool graph_update = true;

    std::filesystem::path templates_dir = SUBQRAG_DEFAULT_TEMPLATE_DIR;
    std::filesystem::path snapshot_dir = "subqrag_index";
    std::filesystem::path run_dir = "runs";
    std::filesystem::path stub_script;
    std::filesystem::path wire_log;

    // Throws ConfigError.
    void validate() const;

    SolverConfig solver_config() const;

    // Everything except the API key, in a fixed field order.
    nlohmann::ordered_json to_json() const;
};

std::string_view to_string(BackendKind kind);
BackendKind backend_from_string(std::string_view name);  // throws ConfigError

// Overlays the keys present in a JSON config file. Unknown keys are an error.
// Throws ConfigError, IoError.
void apply_config_file(Config& config, const std::filesystem::path& path);

using EnvLookup = std::function<const char*(const char*)>;

// Overlays SUBQRAG_* variables; OPENAI_API_KEY fills an otherwise empty key.
void apply_environment(Config& config, const EnvLookup& getenv_fn);

std::shared_ptr<Embedder> make_embedder(const Config& config);

// Throws ConfigError (e.g. stub backend without a script), MissingTemplate.
std::unique_ptr<Gateway> make_gateway(const Config& config);

}  // namespace subqrag
