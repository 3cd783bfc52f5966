#pragma once
// Append-only, deduplicating triple store.
//
// Triples get dense ids in insertion order. Two triples are the same fact
// when their dedup keys match: every field casefolded and whitespace
// collapsed. Stored fields are trimmed but otherwise kept as first seen.
//
// Snapshot format (one JSON object per line, fixed field order):
//   {"id":0,"head":"...","relation":"...","tail":"...","provenance":"doc:123","step":0}
//
// The graph itself is not synchronized; see Stores (solver.hpp) for the
// reader/writer contract used by the pipeline.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace subqrag {

using TripleId = std::int64_t;

inline constexpr std::string_view kDynamicProvenancePrefix = "dynamic:";
inline constexpr std::string_view kDocProvenancePrefix = "doc:";

struct Triple {
    TripleId id = 0;
    std::string head;
    std::string relation;
    std::string tail;
    std::string provenance;
    int created_at_step = 0;

    bool operator==(const Triple&) const = default;
};

// A bare (head, relation, tail) as produced by extraction, before insertion.
struct RawTriple {
    std::string head;
    std::string relation;
    std::string tail;

    bool operator==(const RawTriple&) const = default;
};

using DedupKey = std::array<std::string, 3>;

DedupKey dedup_key(std::string_view head, std::string_view relation, std::string_view tail);
inline DedupKey dedup_key(const Triple& t) { return dedup_key(t.head, t.relation, t.tail); }

// Casefolded, whitespace-collapsed entity name used by the entity index.
std::string entity_key(std::string_view entity);

// True when all three fields are non-empty after trimming.
bool is_valid_triple(std::string_view head, std::string_view relation, std::string_view tail);

struct InsertResult {
    TripleId id = 0;
    bool inserted = false;
};

struct GraphStats {
    std::size_t triple_count = 0;
    std::size_t entity_count = 0;
    std::size_t dynamic_count = 0;

    bool operator==(const GraphStats&) const = default;
};

class KnowledgeGraph {
public:
    // Throws EmptyField if any field trims to empty.
    InsertResult insert_triple(std::string_view head, std::string_view relation,
                               std::string_view tail, std::string_view provenance, int step);

    // Throws UnknownId.
    const Triple& lookup(TripleId id) const;
    bool contains(TripleId id) const noexcept;

    // Id of the stored triple with this key, or -1.
    TripleId find(const DedupKey& key) const;

    GraphStats stats() const;

    const std::vector<Triple>& triples() const noexcept { return triples_; }
    const std::map<std::string, std::set<TripleId>>& entity_index() const noexcept {
        return entity_index_;
    }
    std::size_t size() const noexcept { return triples_.size(); }
    bool empty() const noexcept { return triples_.empty(); }

    bool operator==(const KnowledgeGraph& other) const { return triples_ == other.triples_; }

private:
    std::vector<Triple> triples_;
    std::map<DedupKey, TripleId> key_index_;
    std::map<std::string, std::set<TripleId>> entity_index_;

    friend KnowledgeGraph snapshot_load(const std::filesystem::path&);
    void append_unchecked(Triple t);
};

// One snapshot line for a triple, without trailing newline.
std::string triple_to_json_line(const Triple& t);

// Throws IoError.
void snapshot_save(const KnowledgeGraph& graph, const std::filesystem::path& path);

// Throws IoError, ParseError (1-based line), DuplicateKeyError.
KnowledgeGraph snapshot_load(const std::filesystem::path& path);

}  // namespace subqrag
