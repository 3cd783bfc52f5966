#include "subqrag/kg_store.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

using ojson = nlohmann::ordered_json;

namespace {

std::string normalize_field(std::string_view s) {
    return text::casefold(text::collapse_whitespace(s));
}

std::string required_string(const ojson& obj, const char* field, std::size_t line) {
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw ParseError(line, std::string("missing or non-string field \"") + field + "\"");
    }
    return it->get<std::string>();
}

}  // namespace

DedupKey dedup_key(std::string_view head, std::string_view relation, std::string_view tail) {
    return {normalize_field(head), normalize_field(relation), normalize_field(tail)};
}

std::string entity_key(std::string_view entity) { return normalize_field(entity); }

bool is_valid_triple(std::string_view head, std::string_view relation, std::string_view tail) {
    return !text::trim(head).empty() && !text::trim(relation).empty() &&
           !text::trim(tail).empty();
}

InsertResult KnowledgeGraph::insert_triple(std::string_view head, std::string_view relation,
                                           std::string_view tail, std::string_view provenance,
                                           int step) {
    Triple t;
    t.head = text::trim(head);
    t.relation = text::trim(relation);
    t.tail = text::trim(tail);
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
        throw EmptyField("triple field is empty after trimming");
    }
    const DedupKey key = dedup_key(t);
    if (auto it = key_index_.find(key); it != key_index_.end()) {
        return {it->second, false};
    }
    t.id = static_cast<TripleId>(triples_.size());
    t.provenance = std::string(provenance);
    t.created_at_step = step;
    const TripleId id = t.id;
    append_unchecked(std::move(t));
    return {id, true};
}

void KnowledgeGraph::append_unchecked(Triple t) {
    const TripleId id = t.id;
    key_index_.emplace(dedup_key(t), id);
    entity_index_[entity_key(t.head)].insert(id);
    entity_index_[entity_key(t.tail)].insert(id);
    triples_.push_back(std::move(t));
}

const Triple& KnowledgeGraph::lookup(TripleId id) const {
    if (!contains(id)) throw UnknownId(id);
    return triples_[static_cast<std::size_t>(id)];
}

bool KnowledgeGraph::contains(TripleId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < triples_.size();
}

TripleId KnowledgeGraph::find(const DedupKey& key) const {
    auto it = key_index_.find(key);
    return it == key_index_.end() ? -1 : it->second;
}

GraphStats KnowledgeGraph::stats() const {
    GraphStats s;
    s.triple_count = triples_.size();
    s.entity_count = entity_index_.size();
    for (const auto& t : triples_) {
        if (text::starts_with(t.provenance, kDynamicProvenancePrefix)) ++s.dynamic_count;
    }
    return s;
}

std::string triple_to_json_line(const Triple& t) {
    ojson j;
    j["id"] = t.id;
    j["head"] = t.head;
    j["relation"] = t.relation;
    j["tail"] = t.tail;
    j["provenance"] = t.provenance;
    j["step"] = t.created_at_step;
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

void snapshot_save(const KnowledgeGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& t : graph.triples()) {
        out << triple_to_json_line(t) << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

KnowledgeGraph snapshot_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    KnowledgeGraph graph;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const ojson::parse_error& e) {
            throw ParseError(line_no, e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "record is not a JSON object");

        Triple t;
        auto id_it = j.find("id");
        auto step_it = j.find("step");
        if (id_it == j.end() || !id_it->is_number_integer()) {
            throw ParseError(line_no, "missing or non-integer field \"id\"");
        }
        if (step_it == j.end() || !step_it->is_number_integer()) {
            throw ParseError(line_no, "missing or non-integer field \"step\"");
        }
        t.id = id_it->get<TripleId>();
        t.created_at_step = step_it->get<int>();
        t.head = required_string(j, "head", line_no);
        t.relation = required_string(j, "relation", line_no);
        t.tail = required_string(j, "tail", line_no);
        t.provenance = required_string(j, "provenance", line_no);

        if (!is_valid_triple(t.head, t.relation, t.tail)) {
            throw ParseError(line_no, "empty triple field");
        }
        if (t.id != static_cast<TripleId>(graph.size())) {
            throw ParseError(line_no, "ids must be dense and in insertion order (expected " +
                                          std::to_string(graph.size()) + ", got " +
                                          std::to_string(t.id) + ")");
        }
        if (graph.find(dedup_key(t)) >= 0) {
            throw DuplicateKeyError(line_no, "(" + t.head + ", " + t.relation + ", " + t.tail + ")");
        }
        graph.append_unchecked(std::move(t));
    }
    if (in.bad()) throw IoError("read failed for " + path.string());
    return graph;
}

}  // namespace subqrag
