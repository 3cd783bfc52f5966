#include "subqrag/embedders.hpp"

#include <array>
#include <cstdint>
#include <set>

#include <nlohmann/json.hpp>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

const std::set<std::string, std::less<>>& stopwords() {
    static const std::set<std::string, std::less<>> words = {
        "a",    "an",    "and",  "are",   "as",   "at",  "be",   "by",    "did",  "do",
        "does", "for",   "from", "has",   "have", "he",  "her",  "his",   "in",   "is",
        "it",   "its",   "of",   "on",    "or",   "she", "that", "the",   "this", "to",
        "was",  "were",  "what", "when",  "where", "which", "who", "whom", "whose", "why",
        "with", "how"};
    return words;
}

bool is_word_byte(unsigned char c) {
    return c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z');
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw ConfigError("hashing embedder dimension must be positive");
}

Embedding HashingEmbedder::embed(std::string_view input) const {
    std::vector<double> v(dimension_, 0.0);
    const std::string folded = text::casefold(input);
    std::size_t i = 0;
    while (i < folded.size()) {
        while (i < folded.size() && !is_word_byte(static_cast<unsigned char>(folded[i]))) ++i;
        const std::size_t start = i;
        while (i < folded.size() && is_word_byte(static_cast<unsigned char>(folded[i]))) ++i;
        if (i == start) continue;
        const std::string_view token(folded.data() + start, i - start);
        if (stopwords().contains(token)) continue;
        const std::uint64_t h = fnv1a(token);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % dimension_] += sign;
    }
    return Embedding(std::move(v));
}

FixtureEmbedder::FixtureEmbedder(std::string name, std::size_t dimension,
                                 std::map<std::string, std::vector<double>> table,
                                 std::shared_ptr<const Embedder> fallback)
    : name_(std::move(name)), dimension_(dimension), fallback_(std::move(fallback)) {
    for (auto& [k, v] : table) {
        if (v.size() != dimension_) throw DimensionMismatch(dimension_, v.size());
        table_.emplace(k, std::move(v));
    }
    if (fallback_ && fallback_->dimension() != dimension_) {
        throw DimensionMismatch(dimension_, fallback_->dimension());
    }
}

Embedding FixtureEmbedder::embed(std::string_view input) const {
    if (auto it = table_.find(input); it != table_.end()) return Embedding(it->second);
    if (fallback_) return fallback_->embed(input);
    return Embedding(std::vector<double>(dimension_, 0.0));
}

RemoteEmbedder::RemoteEmbedder(std::string url, std::string model, std::string api_key,
                               std::size_t dimension, RetryPolicy policy)
    : client_(std::move(url), std::move(api_key), policy), model_(std::move(model)),
      dimension_(dimension) {}

Embedding RemoteEmbedder::embed(std::string_view input) const {
    const std::string key(input);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    nlohmann::json body = {{"model", model_}, {"input", key}};
    const HttpResult res = client_.post(body.dump());
    std::vector<double> values;
    try {
        const auto j = nlohmann::json::parse(res.body);
        values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(res.status, std::string("malformed embedding response: ") + e.what());
    }
    if (values.size() != dimension_) throw DimensionMismatch(dimension_, values.size());
    Embedding e(std::move(values));
    std::lock_guard lock(mutex_);
    return cache_.emplace(key, std::move(e)).first->second;
}

}  // namespace subqrag
