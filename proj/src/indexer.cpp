#include "subqrag/indexer.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void Corpus::add(Document doc) {
    if (text::trim(doc.text).empty()) throw EmptyField("document " + doc.id + " has empty text");
    if (id_index_.contains(doc.id)) throw DuplicateDocId(doc.id);
    id_index_.emplace(doc.id, documents_.size());
    documents_.push_back(std::move(doc));
}

std::optional<std::size_t> Corpus::position(const std::string& id) const {
    auto it = id_index_.find(id);
    if (it == id_index_.end()) return std::nullopt;
    return it->second;
}

Corpus ingest_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus " + path.string());
    Corpus corpus;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw ParseError(line_no, "not a JSON object");
        auto field = [&](const char* name, bool required) -> std::string {
            auto it = j.find(name);
            if (it == j.end() || it->is_null()) {
                if (required) throw ParseError(line_no, std::string("missing field \"") + name + "\"");
                return {};
            }
            if (it->is_string()) return it->get<std::string>();
            if (it->is_number_integer() && std::string_view(name) == "id") return it->dump();
            throw ParseError(line_no, std::string("field \"") + name + "\" is not a string");
        };
        Document doc{field("id", true), field("title", false), field("text", true)};
        if (text::trim(doc.text).empty()) throw ParseError(line_no, "empty \"text\"");
        corpus.add(std::move(doc));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& d : corpus.documents()) {
        ojson j;
        j["id"] = d.id;
        j["title"] = d.title;
        j["text"] = d.text;
        out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::string passage_text(const Document& doc) {
    const std::string title = text::trim(doc.title);
    return title.empty() ? doc.text : title + "\n" + doc.text;
}

std::vector<std::string> chunk_text(std::string_view input, std::size_t budget) {
    if (budget == 0) budget = 1;
    if (input.size() <= budget) return {std::string(input)};

    // Paragraphs are separated by blank lines.
    std::vector<std::string> paragraphs;
    std::string current;
    for (const auto& line : text::split_lines(input)) {
        if (text::trim(line).empty()) {
            if (!current.empty()) paragraphs.push_back(std::move(current));
            current.clear();
            continue;
        }
        if (!current.empty()) current += '\n';
        current += line;
    }
    if (!current.empty()) paragraphs.push_back(std::move(current));

    std::vector<std::string> pieces;
    for (auto& p : paragraphs) {
        std::string_view rest = p;
        while (rest.size() > budget) {
            std::size_t cut = rest.rfind(' ', budget);
            if (cut == std::string_view::npos || cut == 0) cut = budget;
            pieces.emplace_back(text::trim(rest.substr(0, cut)));
            rest = rest.substr(cut);
            while (!rest.empty() && text::is_space(rest.front())) rest.remove_prefix(1);
        }
        if (!rest.empty()) pieces.emplace_back(rest);
    }

    std::vector<std::string> chunks;
    std::string acc;
    for (auto& piece : pieces) {
        if (!acc.empty() && acc.size() + 2 + piece.size() > budget) {
            chunks.push_back(std::move(acc));
            acc.clear();
        }
        if (!acc.empty()) acc += "\n\n";
        acc += piece;
    }
    if (!acc.empty()) chunks.push_back(std::move(acc));
    return chunks;
}

std::vector<RawTriple> parse_extracted_triples(const json& value, std::vector<std::string>* dropped) {
    std::vector<RawTriple> out;
    if (!value.is_array()) return out;
    for (const auto& item : value) {
        const bool shaped = item.is_array() && item.size() == 3 && item[0].is_string() &&
                            item[1].is_string() && item[2].is_string();
        if (!shaped || !is_valid_triple(item[0].get_ref<const std::string&>(),
                                        item[1].get_ref<const std::string&>(),
                                        item[2].get_ref<const std::string&>())) {
            spdlog::warn("dropping malformed extracted triple {}", item.dump());
            if (dropped) dropped->push_back(item.dump());
            continue;
        }
        out.push_back(RawTriple{text::trim(item[0].get<std::string>()),
                                text::trim(item[1].get<std::string>()),
                                text::trim(item[2].get<std::string>())});
    }
    return out;
}

std::vector<RawTriple> extract_triples(std::string_view passage, LlmClient& client,
                                       std::vector<std::string>* dropped) {
    ChatRequest req;
    req.template_name = TemplateName::ExtractTriples;
    req.variables["passage"] = std::string(passage);
    req.max_tokens = 1024;
    const StructuredResult res = complete_structured(client, req, StructuredShape::array());
    return parse_extracted_triples(res.value, dropped);
}

std::vector<RawTriple> extract_triples(const Document& doc, LlmClient& client,
                                       std::size_t char_budget, std::vector<std::string>* dropped) {
    std::vector<RawTriple> all;
    for (const auto& chunk : chunk_text(passage_text(doc), char_budget)) {
        auto part = extract_triples(chunk, client, dropped);
        all.insert(all.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
    }
    return all;
}

ojson IndexReport::to_json() const {
    ojson j;
    j["documents_processed"] = documents_processed;
    j["triples_extracted"] = triples_extracted;
    j["triples_stored"] = triples_stored;
    j["duplicates_skipped"] = duplicates_skipped;
    j["items_dropped"] = items_dropped;
    j["failures"] = failures;
    j["triple_free"] = triple_free;
    return j;
}

namespace {

struct DocExtraction {
    std::vector<RawTriple> triples;
    std::vector<std::string> dropped;
    bool failed = false;
    std::string error;
};

}  // namespace

IndexBuild build_graph_index(const Corpus& corpus, LlmClient& client, const Embedder& embedder,
                             const IndexerOptions& options) {
    const auto& docs = corpus.documents();
    std::vector<DocExtraction> results(docs.size());

    auto work = [&](std::size_t i) {
        auto& r = results[i];
        try {
            r.triples = extract_triples(docs[i], client, options.char_budget, &r.dropped);
        } catch (const LlmError& e) {
            r.failed = true;
            r.error = e.what();
        }
    };

    const auto workers = static_cast<std::size_t>(std::max(1, options.parallelism));
    if (workers == 1 || docs.size() < 2) {
        for (std::size_t i = 0; i < docs.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, docs.size()); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < docs.size(); i = next++) work(i);
            });
        }
    }

    IndexBuild build;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const Document& doc = docs[i];
        auto& r = results[i];
        ++build.report.documents_processed;
        build.report.items_dropped += r.dropped.size();
        if (r.failed) {
            spdlog::warn("extraction failed for doc {}: {}", doc.id, r.error);
            build.report.failures.push_back(std::string(kDocProvenancePrefix) + doc.id);
        } else {
            if (r.triples.empty()) build.report.triple_free.push_back(std::string(kDocProvenancePrefix) + doc.id);
            for (const auto& t : r.triples) {
                ++build.report.triples_extracted;
                const auto res = build.graph.insert_triple(
                    t.head, t.relation, t.tail, std::string(kDocProvenancePrefix) + doc.id, 0);
                if (!res.inserted) {
                    ++build.report.duplicates_skipped;
                    continue;
                }
                ++build.report.triples_stored;
                build.triple_index.upsert(res.id, verbalize_triple(build.graph.lookup(res.id)),
                                          embedder);
            }
        }
        build.passage_index.upsert(static_cast<std::int64_t>(i), passage_text(doc), embedder);
    }
    if (build.triple_index.embedder_name().empty()) build.triple_index.set_embedder_name(embedder.name());
    if (build.passage_index.embedder_name().empty()) build.passage_index.set_embedder_name(embedder.name());
    return build;
}

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[8192];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return fmt::format("{:016x}", h);
}

ojson make_index_manifest(const std::filesystem::path& corpus_path, const Embedder& embedder,
                          const IndexBuild& build) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);

    ojson m;
    m["corpus_path"] = corpus_path.string();
    m["corpus_fnv1a64"] = file_fingerprint(corpus_path);
    m["embedder"] = embedder.name();
    m["dimension"] = embedder.dimension();
    m["triples"] = build.graph.size();
    m["passages"] = build.passage_index.size();
    m["report"] = build.report.to_json();
    m["created_at"] = stamp;
    return m;
}

}  // namespace subqrag
