#include "subqrag/config.hpp"

#include <charconv>
#include <fstream>

#include "subqrag/embedders.hpp"
#include "subqrag/errors.hpp"

namespace subqrag {

using json = nlohmann::json;

namespace {

template <typename T>
T parse_number(std::string_view name, std::string_view value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError(std::string(name) + ": not a number: " + std::string(value));
    }
    return out;
}

bool parse_bool(std::string_view name, std::string_view value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ConfigError(std::string(name) + ": not a boolean: " + std::string(value));
}

// One settable field, addressable from the config file and the environment.
struct Setting {
    const char* key;
    std::function<void(Config&, const json&)> from_json;
    std::function<void(Config&, std::string_view)> from_string;
};

template <typename T>
Setting number_setting(const char* key, T Config::*member) {
    return {key,
            [key, member](Config& c, const json& v) {
                if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
                c.*member = v.get<T>();
            },
            [key, member](Config& c, std::string_view s) { c.*member = parse_number<T>(key, s); }};
}

Setting string_setting(const char* key, std::string Config::*member) {
    return {key,
            [key, member](Config& c, const json& v) {
                if (!v.is_string()) throw ConfigError(std::string(key) + " must be a string");
                c.*member = v.get<std::string>();
            },
            [member](Config& c, std::string_view s) { c.*member = std::string(s); }};
}

Setting path_setting(const char* key, std::filesystem::path Config::*member) {
    return {key,
            [key, member](Config& c, const json& v) {
                if (!v.is_string()) throw ConfigError(std::string(key) + " must be a string");
                c.*member = v.get<std::string>();
            },
            [member](Config& c, std::string_view s) { c.*member = std::string(s); }};
}

Setting bool_setting(const char* key, bool Config::*member) {
    return {key,
            [key, member](Config& c, const json& v) {
                if (!v.is_boolean()) throw ConfigError(std::string(key) + " must be a boolean");
                c.*member = v.get<bool>();
            },
            [key, member](Config& c, std::string_view s) { c.*member = parse_bool(key, s); }};
}

const std::vector<Setting>& settings() {
    static const std::vector<Setting> all = {
        {"backend",
         [](Config& c, const json& v) {
             if (!v.is_string()) throw ConfigError("backend must be a string");
             c.backend = backend_from_string(v.get<std::string>());
         },
         [](Config& c, std::string_view s) { c.backend = backend_from_string(s); }},
        string_setting("endpoint", &Config::endpoint),
        string_setting("model", &Config::model),
        string_setting("api_key", &Config::api_key),
        string_setting("embedder", &Config::embedder),
        number_setting("embedding_dimension", &Config::embedding_dimension),
        string_setting("embedding_endpoint", &Config::embedding_endpoint),
        string_setting("embedding_model", &Config::embedding_model),
        number_setting("k_triples", &Config::k_triples),
        number_setting("k_docs", &Config::k_docs),
        number_setting("max_subquestions", &Config::max_subquestions),
        number_setting("llm_budget", &Config::llm_budget),
        number_setting("parallelism", &Config::parallelism),
        number_setting("max_in_flight", &Config::max_in_flight),
        number_setting("char_budget", &Config::char_budget),
        number_setting("max_retries", &Config::max_retries),
        number_setting("initial_backoff_ms", &Config::initial_backoff_ms),
        number_setting("request_timeout_s", &Config::request_timeout_s),
        bool_setting("decomposition", &Config::decomposition),
        bool_setting("rewriting", &Config::rewriting),
        bool_setting("graph_update", &Config::graph_update),
        path_setting("templates_dir", &Config::templates_dir),
        path_setting("snapshot_dir", &Config::snapshot_dir),
        path_setting("run_dir", &Config::run_dir),
        path_setting("stub_script", &Config::stub_script),
        path_setting("wire_log", &Config::wire_log),
    };
    return all;
}

std::string env_name(std::string_view key) {
    std::string out = "SUBQRAG_";
    for (char c : key) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

}  // namespace

std::string_view to_string(BackendKind kind) {
    return kind == BackendKind::Stub ? "stub" : "remote";
}

BackendKind backend_from_string(std::string_view name) {
    if (name == "remote") return BackendKind::Remote;
    if (name == "stub") return BackendKind::Stub;
    throw ConfigError("unknown backend: " + std::string(name));
}

void Config::validate() const {
    if (k_triples < 1) throw ConfigError("k_triples must be >= 1");
    if (k_docs < 1) throw ConfigError("k_docs must be >= 1");
    if (llm_budget < 1) throw ConfigError("llm_budget must be >= 1");
    if (max_subquestions < 1) throw ConfigError("max_subquestions must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (embedding_dimension < 1) throw ConfigError("embedding_dimension must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (embedder != "hashing" && embedder != "remote") {
        throw ConfigError("unknown embedder: " + embedder + " (expected hashing or remote)");
    }
}

SolverConfig Config::solver_config() const {
    SolverConfig s;
    s.k_triples = k_triples;
    s.k_docs = k_docs;
    s.max_sub_questions = max_subquestions;
    s.llm_budget = llm_budget;
    s.decomposition = decomposition;
    s.rewriting = rewriting;
    s.graph_update = graph_update;
    return s;
}

nlohmann::ordered_json Config::to_json() const {
    nlohmann::ordered_json j;
    j["backend"] = to_string(backend);
    j["endpoint"] = endpoint;
    j["model"] = model;
    j["embedder"] = embedder;
    j["embedding_dimension"] = embedding_dimension;
    if (embedder == "remote") {
        j["embedding_endpoint"] = embedding_endpoint;
        j["embedding_model"] = embedding_model;
    }
    j["k_triples"] = k_triples;
    j["k_docs"] = k_docs;
    j["max_subquestions"] = max_subquestions;
    j["llm_budget"] = llm_budget;
    j["parallelism"] = parallelism;
    j["max_in_flight"] = max_in_flight;
    j["char_budget"] = char_budget;
    j["decomposition"] = decomposition;
    j["rewriting"] = rewriting;
    j["graph_update"] = graph_update;
    j["templates_dir"] = templates_dir.string();
    j["snapshot_dir"] = snapshot_dir.string();
    j["run_dir"] = run_dir.string();
    if (!stub_script.empty()) j["stub_script"] = stub_script.string();
    return j;
}

void apply_config_file(Config& config, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("config file is not a JSON object: " + path.string());
    }
    for (const auto& [key, value] : j.items()) {
        const auto& all = settings();
        auto it = std::find_if(all.begin(), all.end(), [&](const Setting& s) { return key == s.key; });
        if (it == all.end()) throw ConfigError("unknown config key: " + key);
        it->from_json(config, value);
    }
}

void apply_environment(Config& config, const EnvLookup& getenv_fn) {
    for (const auto& s : settings()) {
        const std::string name = env_name(s.key);
        if (const char* v = getenv_fn(name.c_str()); v && *v) s.from_string(config, v);
    }
    if (config.api_key.empty()) {
        if (const char* v = getenv_fn("OPENAI_API_KEY"); v && *v) config.api_key = v;
    }
}

std::shared_ptr<Embedder> make_embedder(const Config& config) {
    if (config.embedder == "remote") {
        RetryPolicy policy;
        policy.max_retries = config.max_retries;
        policy.initial_delay = std::chrono::milliseconds(config.initial_backoff_ms);
        return std::make_shared<RemoteEmbedder>(config.embedding_endpoint, config.embedding_model,
                                                config.api_key, config.embedding_dimension, policy);
    }
    return std::make_shared<HashingEmbedder>(config.embedding_dimension);
}

std::unique_ptr<Gateway> make_gateway(const Config& config) {
    TemplateRegistry templates = TemplateRegistry::load(config.templates_dir);
    std::unique_ptr<ChatBackend> backend;
    if (config.backend == BackendKind::Stub) {
        if (config.stub_script.empty()) throw ConfigError("stub backend needs stub_script");
        backend = std::make_unique<StubBackend>(StubScript::load(config.stub_script));
    } else {
        RetryPolicy policy;
        policy.max_retries = config.max_retries;
        policy.initial_delay = std::chrono::milliseconds(config.initial_backoff_ms);
        backend = std::make_unique<ChatCompletionBackend>(
            config.endpoint, config.model, config.api_key, policy,
            std::chrono::seconds(config.request_timeout_s));
    }
    auto gateway =
        std::make_unique<Gateway>(std::move(templates), std::move(backend), config.max_in_flight);
    if (!config.wire_log.empty()) gateway->set_wire_log(config.wire_log);
    return gateway;
}

}  // namespace subqrag
