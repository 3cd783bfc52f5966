#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "subqrag/kg_store.hpp"
#include "subqrag/llm_gateway.hpp"
#include "subqrag/vector_index.hpp"

namespace subqrag {

struct Document {
    std::string id;
    std::string title;
    std::string text;

    bool operator==(const Document&) const = default;
};

class Corpus {
public:
    // Throws DuplicateDocId, EmptyField (text blank).
    void add(Document doc);

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const Document& at(std::size_t position) const { return documents_.at(position); }
    std::optional<std::size_t> position(const std::string& id) const;
    std::size_t size() const noexcept { return documents_.size(); }
    bool empty() const noexcept { return documents_.empty(); }

    bool operator==(const Corpus& o) const { return documents_ == o.documents_; }

private:
    std::vector<Document> documents_;
    std::unordered_map<std::string, std::size_t> id_index_;
};

// Line-JSON {"id","title","text"}; blank lines skipped. Throws IoError,
// ParseError(line), DuplicateDocId.
Corpus ingest_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// What gets embedded into the passage index: "title\ntext", or just text.
std::string passage_text(const Document& doc);

// Paragraph-boundary chunks of at most `budget` characters. A single
// paragraph longer than the budget is split at whitespace (or hard-split).
std::vector<std::string> chunk_text(std::string_view text, std::size_t budget);

// Parses an extraction completion: a JSON array of 3-element string arrays.
// Malformed or empty-field items are dropped and described in `dropped`.
std::vector<RawTriple> parse_extracted_triples(const nlohmann::json& value,
                                               std::vector<std::string>* dropped = nullptr);

// One extract_triples call over `passage`. Throws StructuredParseError after
// the gateway retry.
std::vector<RawTriple> extract_triples(std::string_view passage, LlmClient& client,
                                       std::vector<std::string>* dropped = nullptr);

// Extracts a whole document, chunking when it exceeds `char_budget`.
std::vector<RawTriple> extract_triples(const Document& doc, LlmClient& client,
                                       std::size_t char_budget = 8000,
                                       std::vector<std::string>* dropped = nullptr);

struct IndexReport {
    std::size_t documents_processed = 0;
    std::size_t triples_extracted = 0;
    std::size_t triples_stored = 0;
    std::size_t duplicates_skipped = 0;
    std::size_t items_dropped = 0;
    std::vector<std::string> failures;     // "doc:<id>"
    std::vector<std::string> triple_free;  // documents whose extraction returned nothing

    nlohmann::ordered_json to_json() const;
};

struct IndexerOptions {
    std::size_t char_budget = 8000;
    int parallelism = 1;
};

struct IndexBuild {
    KnowledgeGraph graph;
    VectorIndex triple_index;
    VectorIndex passage_index;
    IndexReport report;
};

// Extraction may run concurrently; insertion always follows corpus order so
// the result does not depend on completion order. A document whose
// extraction fails contributes nothing and is listed in report.failures.
IndexBuild build_graph_index(const Corpus& corpus, LlmClient& client, const Embedder& embedder,
                             const IndexerOptions& options = {});

// FNV-1a 64 of a file's bytes, as 16 hex digits. Throws IoError.
std::string file_fingerprint(const std::filesystem::path& path);

nlohmann::ordered_json make_index_manifest(const std::filesystem::path& corpus_path,
                                           const Embedder& embedder, const IndexBuild& build);

}  // namespace subqrag
