#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "subqrag/kg_store.hpp"

namespace subqrag {

struct Embedding {
    std::vector<double> values;
    double norm = 0.0;

    Embedding() = default;
    explicit Embedding(std::vector<double> v);

    std::size_t dimension() const noexcept { return values.size(); }
};

// Cosine similarity; 0 when either side has zero norm.
double cosine(const Embedding& a, const Embedding& b);

// Text -> vector. Implementations must be deterministic within a process and
// safe to call from several threads.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual Embedding embed(std::string_view text) const = 0;
};

// "{head} {relation} {tail}" with internal whitespace collapsed.
std::string verbalize_triple(const Triple& t);
std::string verbalize_triple(const RawTriple& t);

struct IndexEntry {
    std::int64_t key = 0;
    std::string text;
    Embedding embedding;
};

struct ScoredKey {
    std::int64_t key = 0;
    double score = 0.0;

    bool operator==(const ScoredKey&) const = default;
};

// Exact full-scan cosine index. Not synchronized: callers serialize writes
// against reads (see Stores).
class VectorIndex {
public:
    VectorIndex() = default;

    // Embeds `text` and stores it under `key`, replacing any previous entry.
    // Throws DimensionMismatch if the embedder disagrees with existing entries.
    void upsert(std::int64_t key, std::string text, const Embedder& embedder);
    void upsert(std::int64_t key, std::string text, Embedding embedding);

    // min(k, size) results, score descending, ties by ascending key.
    // k must be >= 1 (std::invalid_argument otherwise).
    std::vector<ScoredKey> top_k(std::string_view query_text, std::size_t k,
                                 const Embedder& embedder) const;
    std::vector<ScoredKey> top_k(const Embedding& query, std::size_t k) const;

    bool contains(std::int64_t key) const { return positions_.contains(key); }
    const IndexEntry& entry(std::int64_t key) const;
    const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    // 0 until the first entry arrives.
    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& embedder_name() const noexcept { return embedder_name_; }
    void set_embedder_name(std::string name) { embedder_name_ = std::move(name); }

private:
    std::vector<IndexEntry> entries_;
    std::unordered_map<std::int64_t, std::size_t> positions_;
    std::size_t dimension_ = 0;
    std::string embedder_name_;
};

// Sidecar format: a header line {"embedder":NAME,"dimension":D,"count":N}
// followed by one {"key":K,"text":"...","values":[...]} line per entry, in
// insertion order. Throws IoError.
void save_index(const VectorIndex& index, const std::filesystem::path& path);

// Throws IoError, ParseError, EmbedderMismatch when the header names a
// different embedder or dimension than `expected`.
VectorIndex load_index(const std::filesystem::path& path, const Embedder& expected);

}  // namespace subqrag
