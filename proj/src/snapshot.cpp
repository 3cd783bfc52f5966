#include "subqrag/snapshot.hpp"

#include <fstream>

#include "subqrag/errors.hpp"

namespace subqrag {

bool SnapshotPaths::exists() const { return std::filesystem::exists(graph()); }

void save_stores(const Stores& stores, const SnapshotPaths& paths,
                 const nlohmann::ordered_json& manifest) {
    std::error_code ec;
    std::filesystem::create_directories(paths.dir, ec);
    if (ec) throw IoError("cannot create " + paths.dir.string() + ": " + ec.message());

    std::shared_lock lock(stores.mutex);
    snapshot_save(stores.graph, paths.graph());
    save_index(stores.triple_index, paths.triple_index());
    save_index(stores.passage_index, paths.passage_index());
    save_corpus(stores.corpus, paths.corpus());
    std::ofstream out(paths.manifest(), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + paths.manifest().string());
    out << manifest.dump(2) << '\n';
}

void save_graph_and_triples(const Stores& stores, const SnapshotPaths& paths) {
    std::shared_lock lock(stores.mutex);
    snapshot_save(stores.graph, paths.graph());
    save_index(stores.triple_index, paths.triple_index());
}

std::unique_ptr<Stores> load_stores(const SnapshotPaths& paths, const Embedder& embedder) {
    auto stores = std::make_unique<Stores>(
        snapshot_load(paths.graph()), load_index(paths.triple_index(), embedder),
        load_index(paths.passage_index(), embedder), ingest_corpus(paths.corpus()));
    if (stores->triple_index.size() != stores->graph.size()) {
        throw ParseError(0, "triple index has " + std::to_string(stores->triple_index.size()) +
                                " entries but the graph has " +
                                std::to_string(stores->graph.size()) + " triples");
    }
    for (const auto& t : stores->graph.triples()) {
        if (!stores->triple_index.contains(t.id)) {
            throw ParseError(0, "triple " + std::to_string(t.id) + " has no embedding");
        }
    }
    if (stores->passage_index.size() != stores->corpus.size()) {
        throw ParseError(0, "passage index does not match the corpus");
    }
    if (stores->triple_index.embedder_name().empty()) stores->triple_index.set_embedder_name(embedder.name());
    if (stores->passage_index.embedder_name().empty()) stores->passage_index.set_embedder_name(embedder.name());
    return stores;
}

}  // namespace subqrag
