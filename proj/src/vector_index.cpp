#include "subqrag/vector_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

using ojson = nlohmann::ordered_json;

namespace {

double euclidean_norm(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x * x;
    return std::sqrt(sum);
}

bool ranks_before(const ScoredKey& a, const ScoredKey& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.key < b.key;
}

}  // namespace

Embedding::Embedding(std::vector<double> v) : values(std::move(v)), norm(euclidean_norm(values)) {}

double cosine(const Embedding& a, const Embedding& b) {
    if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
    const std::size_t n = std::min(a.values.size(), b.values.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += a.values[i] * b.values[i];
    const double s = dot / (a.norm * b.norm);
    return std::clamp(s, -1.0, 1.0);
}

std::string verbalize_triple(const Triple& t) {
    return verbalize_triple(RawTriple{t.head, t.relation, t.tail});
}

std::string verbalize_triple(const RawTriple& t) {
    return text::collapse_whitespace(t.head) + " " + text::collapse_whitespace(t.relation) + " " +
           text::collapse_whitespace(t.tail);
}

void VectorIndex::upsert(std::int64_t key, std::string text, const Embedder& embedder) {
    if (dimension_ != 0 && embedder.dimension() != dimension_) {
        throw DimensionMismatch(dimension_, embedder.dimension());
    }
    Embedding e = embedder.embed(text);
    if (embedder_name_.empty()) embedder_name_ = embedder.name();
    upsert(key, std::move(text), std::move(e));
}

void VectorIndex::upsert(std::int64_t key, std::string text, Embedding embedding) {
    if (dimension_ != 0 && embedding.dimension() != dimension_) {
        throw DimensionMismatch(dimension_, embedding.dimension());
    }
    if (dimension_ == 0) dimension_ = embedding.dimension();
    if (auto it = positions_.find(key); it != positions_.end()) {
        auto& slot = entries_[it->second];
        slot.text = std::move(text);
        slot.embedding = std::move(embedding);
        return;
    }
    positions_.emplace(key, entries_.size());
    entries_.push_back(IndexEntry{key, std::move(text), std::move(embedding)});
}

const IndexEntry& VectorIndex::entry(std::int64_t key) const {
    auto it = positions_.find(key);
    if (it == positions_.end()) throw UnknownId(key);
    return entries_[it->second];
}

std::vector<ScoredKey> VectorIndex::top_k(std::string_view query_text, std::size_t k,
                                          const Embedder& embedder) const {
    if (k < 1) throw std::invalid_argument("top_k requires k >= 1");
    if (entries_.empty()) return {};
    if (embedder.dimension() != dimension_) throw DimensionMismatch(dimension_, embedder.dimension());
    return top_k(embedder.embed(query_text), k);
}

std::vector<ScoredKey> VectorIndex::top_k(const Embedding& query, std::size_t k) const {
    if (k < 1) throw std::invalid_argument("top_k requires k >= 1");
    if (entries_.empty()) return {};
    if (query.dimension() != dimension_) throw DimensionMismatch(dimension_, query.dimension());

    std::vector<ScoredKey> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) scored.push_back({e.key, cosine(query, e.embedding)});
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                      ranks_before);
    scored.resize(n);
    return scored;
}

void save_index(const VectorIndex& index, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    ojson header;
    header["embedder"] = index.embedder_name();
    header["dimension"] = index.dimension();
    header["count"] = index.size();
    out << header.dump() << '\n';
    for (const auto& e : index.entries()) {
        ojson j;
        j["key"] = e.key;
        j["text"] = e.text;
        j["values"] = e.embedding.values;
        out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

VectorIndex load_index(const std::filesystem::path& path, const Embedder& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError(1, "missing index header");
    ojson header;
    try {
        header = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
        throw ParseError(1, e.what());
    }
    if (!header.is_object() || !header.contains("embedder") || !header.contains("dimension") ||
        !header.contains("count")) {
        throw ParseError(1, "index header needs embedder, dimension and count");
    }
    const auto name = header["embedder"].get<std::string>();
    const auto dim = header["dimension"].get<std::size_t>();
    const auto count = header["count"].get<std::size_t>();
    if (count > 0 && (name != expected.name() || dim != expected.dimension())) {
        throw EmbedderMismatch("index built with " + name + "/" + std::to_string(dim) +
                               " but current embedder is " + expected.name() + "/" +
                               std::to_string(expected.dimension()));
    }

    VectorIndex index;
    index.set_embedder_name(name);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const ojson::parse_error& e) {
            throw ParseError(line_no, e.what());
        }
        if (!j.is_object() || !j.contains("key") || !j.contains("text") || !j.contains("values") ||
            !j["values"].is_array()) {
            throw ParseError(line_no, "index record needs key, text and values");
        }
        std::vector<double> values;
        try {
            values = j["values"].get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (values.size() != dim) throw ParseError(line_no, "vector length differs from header");
        const auto key = j["key"].get<std::int64_t>();
        if (index.contains(key)) throw ParseError(line_no, "duplicate key " + std::to_string(key));
        index.upsert(key, j["text"].get<std::string>(), Embedding(std::move(values)));
    }
    if (index.size() != count) {
        throw ParseError(line_no, "header count " + std::to_string(count) + " but found " +
                                      std::to_string(index.size()) + " records");
    }
    return index;
}

}  // namespace subqrag
