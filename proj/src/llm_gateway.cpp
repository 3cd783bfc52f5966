#include "subqrag/llm_gateway.hpp"

#include <algorithm>
#include <sstream>

#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

using json = nlohmann::json;

namespace {

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

// Length of a "{identifier}" token starting at body[i], or 0.
std::size_t placeholder_length(std::string_view body, std::size_t i) {
    if (body[i] != '{' || i + 2 >= body.size() || !is_ident_start(body[i + 1])) return 0;
    std::size_t j = i + 2;
    while (j < body.size() && is_ident_char(body[j])) ++j;
    if (j >= body.size() || body[j] != '}') return 0;
    return j - i + 1;
}

long count_tokens(std::string_view s) { return static_cast<long>(text::split_whitespace(s).size()); }

std::string strip_code_fence(std::string_view s) {
    std::string t = text::trim(s);
    if (!text::starts_with(t, "```")) return t;
    const auto first_nl = t.find('\n');
    if (first_nl == std::string::npos) return t;
    t.erase(0, first_nl + 1);
    const auto fence = t.rfind("```");
    if (fence != std::string::npos) t.erase(fence);
    return text::trim(t);
}

bool field_matches(const json& v, FieldKind kind) {
    switch (kind) {
        case FieldKind::String: return v.is_string();
        case FieldKind::Boolean: return v.is_boolean();
        case FieldKind::Number: return v.is_number();
        case FieldKind::Array: return v.is_array();
    }
    return false;
}

bool fits(const json& v, const StructuredShape& shape) {
    if (shape.kind == StructuredShape::Kind::Array) return v.is_array();
    if (!v.is_object()) return false;
    for (const auto& [name, kind] : shape.required_fields) {
        auto it = v.find(name);
        if (it == v.end() || !field_matches(*it, kind)) return false;
    }
    return true;
}

std::optional<json> try_parse(std::string_view s) {
    json v = json::parse(s.begin(), s.end(), nullptr, false);
    if (v.is_discarded()) return std::nullopt;
    return v;
}

}  // namespace

std::string_view to_string(TemplateName name) {
    switch (name) {
        case TemplateName::ExtractTriples: return "extract_triples";
        case TemplateName::Decompose: return "decompose";
        case TemplateName::Rewrite: return "rewrite";
        case TemplateName::AnswerFromTriples: return "answer_from_triples";
        case TemplateName::AnswerFromDocs: return "answer_from_docs";
        case TemplateName::FinalAnswer: return "final_answer";
    }
    return "unknown";
}

std::optional<TemplateName> template_from_string(std::string_view name) {
    for (auto t : kAllTemplates) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

std::vector<std::string> find_placeholders(std::string_view body) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        const std::size_t len = placeholder_length(body, i);
        if (len == 0) continue;
        std::string name(body.substr(i + 1, len - 2));
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
        i += len - 1;
    }
    return out;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
    std::map<TemplateName, std::string> sources;
    for (auto name : kAllTemplates) {
        const auto path = dir / (std::string(to_string(name)) + ".txt");
        std::ifstream in(path, std::ios::binary);
        if (!in) throw MissingTemplate(std::string(to_string(name)));
        std::ostringstream ss;
        ss << in.rdbuf();
        sources.emplace(name, ss.str());
    }
    return from_sources(std::move(sources));
}

TemplateRegistry TemplateRegistry::from_sources(std::map<TemplateName, std::string> sources) {
    TemplateRegistry reg;
    for (auto name : kAllTemplates) {
        auto it = sources.find(name);
        if (it == sources.end()) throw MissingTemplate(std::string(to_string(name)));
        reg.placeholders_.emplace(name, find_placeholders(it->second));
        reg.sources_.emplace(name, std::move(it->second));
    }
    return reg;
}

const std::string& TemplateRegistry::source(TemplateName name) const { return sources_.at(name); }

const std::vector<std::string>& TemplateRegistry::placeholders(TemplateName name) const {
    return placeholders_.at(name);
}

std::string TemplateRegistry::render(const ChatRequest& request) const {
    const std::string& body = source(request.template_name);
    std::string out;
    out.reserve(body.size() + 256);
    for (std::size_t i = 0; i < body.size(); ++i) {
        const std::size_t len = placeholder_length(body, i);
        if (len == 0) {
            out.push_back(body[i]);
            continue;
        }
        const std::string name = body.substr(i + 1, len - 2);
        auto it = request.variables.find(name);
        if (it == request.variables.end()) {
            throw TemplateError("template " + std::string(to_string(request.template_name)) +
                                " has unbound placeholder {" + name + "}");
        }
        out += it->second;
        i += len - 1;
    }
    out += request.suffix;
    return out;
}

Gateway::Gateway(TemplateRegistry templates, std::unique_ptr<ChatBackend> backend, int max_in_flight)
    : templates_(std::move(templates)), backend_(std::move(backend)),
      in_flight_(std::clamp(max_in_flight, 1, kMaxInFlightLimit)) {}

void Gateway::set_wire_log(const std::filesystem::path& path) {
    std::lock_guard lock(log_mutex_);
    wire_log_.emplace(path, std::ios::binary | std::ios::app);
    if (!*wire_log_) throw IoError("cannot open wire log " + path.string());
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    const std::string prompt = templates_.render(request);

    in_flight_.acquire();
    ChatResponse response;
    try {
        response = backend_->send(request, prompt);
    } catch (...) {
        in_flight_.release();
        ++calls_;
        throw;
    }
    in_flight_.release();
    ++calls_;
    retries_ += response.retries;

    std::lock_guard lock(log_mutex_);
    if (wire_log_) {
        nlohmann::ordered_json entry;
        entry["template"] = to_string(request.template_name);
        entry["backend"] = response.backend;
        entry["temperature"] = request.temperature;
        entry["max_tokens"] = request.max_tokens;
        entry["prompt"] = prompt;
        entry["response"] = response.text;
        entry["retries"] = response.retries;
        entry["prompt_tokens"] = response.usage.prompt_tokens;
        entry["completion_tokens"] = response.usage.completion_tokens;
        *wire_log_ << entry.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
        wire_log_->flush();
    }
    return response;
}

ChatResponse BudgetedClient::complete(const ChatRequest& request) {
    if (calls_ >= budget_) throw BudgetExceeded(budget_);
    ++calls_;
    ChatResponse r = inner_.complete(request);
    retries_ += r.retries;
    usage_.prompt_tokens += r.usage.prompt_tokens;
    usage_.completion_tokens += r.usage.completion_tokens;
    return r;
}

std::optional<json> parse_structured(std::string_view raw, const StructuredShape& shape) {
    const std::string body = strip_code_fence(raw);
    if (auto v = try_parse(body); v && fits(*v, shape)) return v;

    const char open = shape.kind == StructuredShape::Kind::Array ? '[' : '{';
    const char close = shape.kind == StructuredShape::Kind::Array ? ']' : '}';
    const auto first = body.find(open);
    const auto last = body.rfind(close);
    if (first == std::string::npos || last == std::string::npos || last <= first) return std::nullopt;
    if (auto v = try_parse(std::string_view(body).substr(first, last - first + 1)); v && fits(*v, shape)) {
        return v;
    }
    return std::nullopt;
}

StructuredResult complete_structured(LlmClient& client, ChatRequest request,
                                     const StructuredShape& shape) {
    StructuredResult result;
    ChatResponse first = client.complete(request);
    if (auto v = parse_structured(first.text, shape)) {
        result.value = std::move(*v);
        result.raw = std::move(first.text);
        return result;
    }
    spdlog::warn("{}: unparseable structured response, retrying with JSON-only suffix",
                 to_string(request.template_name));
    request.suffix += kJsonOnlySuffix;
    ChatResponse second = client.complete(request);
    result.attempts = 2;
    if (auto v = parse_structured(second.text, shape)) {
        result.value = std::move(*v);
        result.raw = std::move(second.text);
        return result;
    }
    throw StructuredParseError(second.text, "no JSON value of the expected shape after retry");
}

// ---------------------------------------------------------------------------

StubScript StubScript::from_json(const json& j) {
    if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array()) {
        throw ParseError(0, "stub script needs a \"rules\" array");
    }
    StubScript script;
    std::size_t n = 0;
    for (const auto& r : j["rules"]) {
        ++n;
        const std::string where = "stub rule " + std::to_string(n);
        if (!r.is_object() || !r.contains("template") || !r["template"].is_string()) {
            throw ParseError(0, where + ": missing template");
        }
        auto name = template_from_string(r["template"].get<std::string>());
        if (!name) throw ParseError(0, where + ": unknown template " + r["template"].dump());
        StubRule rule;
        rule.template_name = *name;
        if (r.contains("when")) {
            if (!r["when"].is_object()) throw ParseError(0, where + ": \"when\" must be an object");
            for (const auto& [k, v] : r["when"].items()) {
                auto& needles = rule.when[k];
                if (v.is_string()) {
                    needles.push_back(v.get<std::string>());
                    continue;
                }
                if (!v.is_array()) throw ParseError(0, where + ": \"when\" values must be strings");
                for (const auto& n : v) {
                    if (!n.is_string()) throw ParseError(0, where + ": \"when\" values must be strings");
                    needles.push_back(n.get<std::string>());
                }
            }
        }
        if (!r.contains("responses") || !r["responses"].is_array() || r["responses"].empty()) {
            throw ParseError(0, where + ": needs a non-empty \"responses\" array");
        }
        for (const auto& resp : r["responses"]) {
            rule.responses.push_back(resp.is_string() ? resp.get<std::string>() : resp.dump());
        }
        rule.repeat = r.value("repeat", false);
        script.rules.push_back(std::move(rule));
    }
    return script;
}

StubScript StubScript::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open stub script " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError(0, "stub script is not valid JSON: " + path.string());
    return from_json(j);
}

json StubScript::to_json() const {
    json out = json::array();
    for (const auto& r : rules) {
        json jr;
        jr["template"] = to_string(r.template_name);
        if (!r.when.empty()) jr["when"] = r.when;
        jr["responses"] = r.responses;
        jr["repeat"] = r.repeat;
        out.push_back(std::move(jr));
    }
    return json{{"rules", std::move(out)}};
}

StubBackend::StubBackend(StubScript script)
    : script_(std::move(script)), cursors_(script_.rules.size(), 0) {}

ChatResponse StubBackend::send(const ChatRequest& request, const std::string& prompt) {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < script_.rules.size(); ++i) {
        const StubRule& rule = script_.rules[i];
        if (rule.template_name != request.template_name) continue;
        const bool exhausted = cursors_[i] >= rule.responses.size();
        if (exhausted && !rule.repeat) continue;
        const bool matches = std::all_of(rule.when.begin(), rule.when.end(), [&](const auto& kv) {
            const std::string* hay = nullptr;
            if (kv.first == "_prompt") {
                hay = &prompt;
            } else if (auto it = request.variables.find(kv.first); it != request.variables.end()) {
                hay = &it->second;
            }
            if (!hay) return false;
            return std::all_of(kv.second.begin(), kv.second.end(), [&](const std::string& needle) {
                return hay->find(needle) != std::string::npos;
            });
        });
        if (!matches) continue;

        const std::size_t pos = std::min(cursors_[i], rule.responses.size() - 1);
        if (cursors_[i] < rule.responses.size()) ++cursors_[i];
        ChatResponse r;
        r.text = rule.responses[pos];
        r.backend = name();
        r.usage.prompt_tokens = count_tokens(prompt);
        r.usage.completion_tokens = count_tokens(r.text);
        return r;
    }
    throw StubExhausted("no scripted response for template " +
                        std::string(to_string(request.template_name)));
}

ChatCompletionBackend::ChatCompletionBackend(std::string url, std::string model, std::string api_key,
                                             RetryPolicy policy, std::chrono::seconds timeout)
    : client_(std::move(url), std::move(api_key), policy, timeout), model_(std::move(model)) {}

ChatResponse ChatCompletionBackend::send(const ChatRequest& request, const std::string& prompt) {
    json body;
    body["model"] = model_;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;

    const HttpResult res = client_.post(body.dump(-1, ' ', false, json::error_handler_t::replace));
    ChatResponse r;
    r.backend = name();
    r.retries = res.retries;
    try {
        const auto j = json::parse(res.body);
        r.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            r.usage.prompt_tokens = u->value("prompt_tokens", 0L);
            r.usage.completion_tokens = u->value("completion_tokens", 0L);
        }
    } catch (const json::exception& e) {
        throw BackendError(res.status, std::string("malformed completion response: ") + e.what());
    }
    return r;
}

}  // namespace subqrag
