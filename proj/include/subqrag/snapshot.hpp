#pragma once
// On-disk layout of a built index:
//   <dir>/graph.jsonl          triple snapshot
//   <dir>/triples.emb.jsonl    triple embeddings (with embedder header)
//   <dir>/passages.emb.jsonl   passage embeddings (with embedder header)
//   <dir>/corpus.jsonl         copy of the ingested corpus
//   <dir>/manifest.json        build manifest

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "subqrag/solver.hpp"

namespace subqrag {

struct SnapshotPaths {
    std::filesystem::path dir;

    std::filesystem::path graph() const { return dir / "graph.jsonl"; }
    std::filesystem::path triple_index() const { return dir / "triples.emb.jsonl"; }
    std::filesystem::path passage_index() const { return dir / "passages.emb.jsonl"; }
    std::filesystem::path corpus() const { return dir / "corpus.jsonl"; }
    std::filesystem::path manifest() const { return dir / "manifest.json"; }

    bool exists() const;
};

// Creates the directory if needed. Takes the shared lock while writing.
void save_stores(const Stores& stores, const SnapshotPaths& paths,
                 const nlohmann::ordered_json& manifest);

// Graph and triple index only (used after dynamic write-backs).
void save_graph_and_triples(const Stores& stores, const SnapshotPaths& paths);

// Throws IoError, ParseError, EmbedderMismatch. Checks that the triple index
// covers exactly the graph ids.
std::unique_ptr<Stores> load_stores(const SnapshotPaths& paths, const Embedder& embedder);

}  // namespace subqrag
