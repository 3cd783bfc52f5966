#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "subqrag/http_client.hpp"
#include "subqrag/vector_index.hpp"

namespace subqrag {

// Local, dependency-free embedder: signed feature hashing of casefolded word
// tokens (stopwords dropped) into `dimension` buckets.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 384);

    std::string name() const override { return "hashing"; }
    std::size_t dimension() const override { return dimension_; }
    Embedding embed(std::string_view text) const override;

private:
    std::size_t dimension_;
};

// Hand-set vectors for known strings; anything else goes to `fallback`, or
// to the zero vector when there is no fallback. Used for test fixtures.
class FixtureEmbedder final : public Embedder {
public:
    FixtureEmbedder(std::string name, std::size_t dimension,
                    std::map<std::string, std::vector<double>> table,
                    std::shared_ptr<const Embedder> fallback = nullptr);

    std::string name() const override { return name_; }
    std::size_t dimension() const override { return dimension_; }
    Embedding embed(std::string_view text) const override;

private:
    std::string name_;
    std::size_t dimension_;
    std::map<std::string, std::vector<double>, std::less<>> table_;
    std::shared_ptr<const Embedder> fallback_;
};

// OpenAI-compatible embeddings endpoint ({"model", "input"} ->
// data[0].embedding). Results are memoized so repeated texts embed
// identically within a run.
class RemoteEmbedder final : public Embedder {
public:
    RemoteEmbedder(std::string url, std::string model, std::string api_key, std::size_t dimension,
                   RetryPolicy policy = {});

    std::string name() const override { return "remote:" + model_; }
    std::size_t dimension() const override { return dimension_; }
    Embedding embed(std::string_view text) const override;

private:
    HttpJsonClient client_;
    std::string model_;
    std::size_t dimension_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, Embedding> cache_;
};

}  // namespace subqrag
