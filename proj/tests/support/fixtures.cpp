#include "support/fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace subqrag::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("subqrag_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << body;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

StubRule make_rule(TemplateName name, std::map<std::string, std::vector<std::string>> when,
                   std::vector<std::string> responses, bool repeat) {
    StubRule r;
    r.template_name = name;
    r.when = std::move(when);
    r.responses = std::move(responses);
    r.repeat = repeat;
    return r;
}

TemplateRegistry default_templates() { return TemplateRegistry::load(SUBQRAG_DEFAULT_TEMPLATE_DIR); }

std::unique_ptr<Gateway> make_stub_gateway(StubScript script, int max_in_flight) {
    return std::make_unique<Gateway>(default_templates(),
                                     std::make_unique<StubBackend>(std::move(script)), max_in_flight);
}

std::unique_ptr<Stores> build_stores(const Corpus& corpus, LlmClient& client,
                                     const Embedder& embedder, int parallelism) {
    IndexerOptions opts;
    opts.parallelism = parallelism;
    IndexBuild b = build_graph_index(corpus, client, embedder, opts);
    return std::make_unique<Stores>(std::move(b.graph), std::move(b.triple_index),
                                    std::move(b.passage_index), corpus);
}

Corpus inception_corpus() {
    Corpus c;
    c.add({"d1", "Inception", "Inception is a 2010 science fiction film directed by Christopher Nolan."});
    c.add({"d2", "Christopher Nolan",
           "Christopher Nolan is a British-American filmmaker. He is married to Emma Thomas, "
           "who produced many of his films."});
    c.add({"d3", "Interstellar", "Interstellar is a 2014 film directed by Christopher Nolan."});
    return c;
}

StubScript inception_script() {
    using T = TemplateName;
    StubScript s;
    auto& r = s.rules;
    // Fallback extraction sees several passages joined by blank lines; the
    // offline passages never contain one, so this rule goes first.
    r.push_back(make_rule(T::ExtractTriples, {{"passage", {"married to Emma Thomas", "\n\n"}}},
                          {R"([["Christopher Nolan","spouse","Emma Thomas"],)"
                           R"(["Inception","directed by","Christopher Nolan"]])"},
                          true));
    r.push_back(make_rule(T::ExtractTriples, {{"passage", {"Inception is a 2010"}}},
                          {R"([["Inception","directed by","Christopher Nolan"],)"
                           R"(["Inception","release year","2010"]])"}));
    r.push_back(make_rule(T::ExtractTriples, {{"passage", {"British-American filmmaker"}}},
                          {R"([["Christopher Nolan","nationality","British-American"]])"}));
    r.push_back(make_rule(T::ExtractTriples, {{"passage", {"Interstellar is a 2014"}}},
                          {R"([["Interstellar","directed by","Christopher Nolan"]])"}));

    r.push_back(make_rule(T::Decompose, {{"question", {"spouse of the director of Inception"}}},
                          {R"(["Who directed Inception?", "Who is the spouse of #1?"])"}, true));
    r.push_back(make_rule(T::Rewrite, {{"subquestion", {"spouse of Christopher Nolan"}}},
                          {"Who is the spouse of Christopher Nolan?"}, true));
    r.push_back(make_rule(T::AnswerFromTriples,
                          {{"question", {"Who directed Inception?"}},
                           {"triples", {"0. Inception | directed by | Christopher Nolan"}}},
                          {R"({"answerable": true, "answer": "Christopher Nolan", "used_triple_ids": [0]})"},
                          true));
    r.push_back(make_rule(T::AnswerFromTriples,
                          {{"question", {"spouse of Christopher Nolan"}},
                           {"triples", {"4. Christopher Nolan | spouse | Emma Thomas"}}},
                          {R"({"answerable": true, "answer": "Emma Thomas", "used_triple_ids": [4]})"},
                          true));
    r.push_back(make_rule(T::AnswerFromTriples, {{"question", {"spouse of Christopher Nolan"}}},
                          {R"({"answerable": false, "answer": "", "used_triple_ids": []})"}, true));
    r.push_back(make_rule(T::AnswerFromDocs, {{"question", {"spouse of Christopher Nolan"}}},
                          {R"({"answer": "Emma Thomas"})"}, true));
    r.push_back(make_rule(T::FinalAnswer,
                          {{"question", {"spouse of the director of Inception"}},
                           {"memory", {"Emma Thomas"}}},
                          {"Emma Thomas"}, true));
    r.push_back(make_rule(T::FinalAnswer, {}, {"UNKNOWN"}, true));
    return s;
}

namespace {

// Invented capitalized words, unique per index (three syllables each).
std::string pseudo_word(int k) {
    static const char* syl[] = {"ka", "lo", "mi", "ren", "tor", "vi", "sha", "dun",
                                "bel", "qua", "zo", "fen", "gri", "pax", "nu", "hel"};
    constexpr int n = 16;
    std::string w = std::string(syl[(k / (n * n)) % n]) + syl[(k / n) % n] + syl[k % n];
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

}  // namespace

SyntheticBench make_synthetic_bench(int n) {
    using T = TemplateName;
    SyntheticBench b;
    b.config.k_docs = 1;
    int word = 17;
    auto next = [&] { return pseudo_word(word += 7); };

    struct Item {
        std::string film, director, spouse;
        TripleId film_triple = -1, spouse_triple = -1;
    };
    std::vector<Item> items;
    TripleId next_id = 0;
    for (int i = 0; i < n; ++i) {
        Item it;
        it.film = next();
        it.director = next() + " " + next();
        it.spouse = next() + " " + next();
        items.push_back(it);
    }
    // Offline ids follow corpus order: film doc then person doc per item.
    for (int i = 0; i < n; ++i) {
        auto& it = items[static_cast<std::size_t>(i)];
        const std::string fid = "f" + std::to_string(i);
        const std::string pid = "p" + std::to_string(i);
        b.corpus.add({fid, it.film, it.film + " is a film directed by " + it.director + "."});
        b.corpus.add({pid, it.director,
                      it.director + " is a filmmaker. " + it.director + " is married to " + it.spouse + "."});
        it.film_triple = next_id++;
        next_id++;  // profession
        if (i % 2 == 0) it.spouse_triple = next_id++;
    }
    b.offline_triples = static_cast<std::size_t>(next_id);
    // Write-backs happen in question order when solved one at a time.
    for (int i = 1; i < n; i += 2) {
        items[static_cast<std::size_t>(i)].spouse_triple = next_id++;
        ++b.needs_update;
    }

    auto& r = b.script.rules;
    auto triple_line = [](TripleId id, const std::string& h, const std::string& rel,
                          const std::string& t) {
        return std::to_string(id) + ". " + h + " | " + rel + " | " + t;
    };
    for (int i = 0; i < n; ++i) {
        const auto& it = items[static_cast<std::size_t>(i)];
        r.push_back(make_rule(T::ExtractTriples, {{"passage", {it.film + " is a film directed by"}}},
                              {json::array({json::array({it.film, "directed by", it.director})}).dump()},
                              true));
        json person = json::array({json::array({it.director, "profession", "filmmaker"})});
        if (i % 2 == 0) person.push_back(json::array({it.director, "spouse", it.spouse}));
        r.push_back(make_rule(T::ExtractTriples, {{"passage", {it.director + " is a filmmaker"}}},
                              {person.dump()}));

        const std::string q2 = "Who is the spouse of " + it.director + "?";
        r.push_back(make_rule(T::Decompose, {{"question", {"director of " + it.film + "?"}}},
                              {json::array({"Who directed " + it.film + "?", "Who is the spouse of #1?"}).dump()},
                              true));
        r.push_back(make_rule(T::Rewrite, {{"subquestion", {"spouse of " + it.director + "?"}}}, {q2}, true));
        r.push_back(make_rule(
            T::AnswerFromTriples,
            {{"question", {"Who directed " + it.film + "?"}},
             {"triples", {triple_line(it.film_triple, it.film, "directed by", it.director)}}},
            {json{{"answerable", true}, {"answer", it.director}, {"used_triple_ids", {it.film_triple}}}.dump()},
            true));
        r.push_back(make_rule(
            T::AnswerFromTriples,
            {{"question", {"spouse of " + it.director + "?"}},
             {"triples", {triple_line(it.spouse_triple, it.director, "spouse", it.spouse)}}},
            {json{{"answerable", true}, {"answer", it.spouse}, {"used_triple_ids", {it.spouse_triple}}}.dump()},
            true));
        r.push_back(make_rule(T::AnswerFromDocs, {{"question", {"spouse of " + it.director + "?"}}},
                              {json{{"answer", it.spouse}}.dump()}, true));
        r.push_back(make_rule(T::AnswerFromDocs, {{"question", {"director of " + it.film + "?"}}},
                              {json{{"answer", it.spouse}}.dump()}, true));
        r.push_back(make_rule(T::AnswerFromDocs, {{"question", {"directed " + it.film + "?"}}},
                              {json{{"answer", it.director}}.dump()}, true));
        r.push_back(make_rule(T::FinalAnswer,
                              {{"question", {"director of " + it.film + "?"}}, {"memory", {it.spouse}}},
                              {it.spouse}, true));

        QAExample ex;
        ex.id = "q" + std::to_string(i);
        ex.question = "Who is the spouse of the director of " + it.film + "?";
        ex.gold_answers = {it.spouse};
        b.dataset.push_back(ex);
    }
    // Fallback extraction sees the same person document again; the offline
    // rule above is single-use, so these take over after indexing.
    for (int i = 0; i < n; ++i) {
        const auto& it = items[static_cast<std::size_t>(i)];
        r.push_back(make_rule(T::ExtractTriples, {{"passage", {"married to " + it.spouse + "."}}},
                              {json::array({json::array({it.director, "spouse", it.spouse}),
                                            json::array({it.director, "profession", "filmmaker"})})
                                   .dump()},
                              true));
    }
    // Catch-alls: nothing found in the graph, nothing extracted, no evidence.
    r.push_back(make_rule(T::AnswerFromTriples, {},
                          {R"({"answerable": false, "answer": "", "used_triple_ids": []})"}, true));
    r.push_back(make_rule(T::ExtractTriples, {}, {"[]"}, true));
    r.push_back(make_rule(T::AnswerFromDocs, {}, {R"({"answer": ""})"}, true));
    r.push_back(make_rule(T::FinalAnswer, {}, {"UNKNOWN"}, true));
    return b;
}

std::vector<ScoredKey> brute_force_top_k(
    const std::vector<std::pair<std::int64_t, std::vector<double>>>& items,
    const std::vector<double>& query, std::size_t k) {
    auto norm = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    const double qn = norm(query);
    std::vector<ScoredKey> all;
    for (const auto& [key, v] : items) {
        double dot = 0;
        for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * query[i];
        const double vn = norm(v);
        double score = (qn == 0 || vn == 0) ? 0.0 : dot / (qn * vn);
        score = std::clamp(score, -1.0, 1.0);
        all.push_back({key, score});
    }
    std::stable_sort(all.begin(), all.end(), [](const ScoredKey& a, const ScoredKey& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

std::string corpus_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& d : corpus.documents()) {
        out += json{{"id", d.id}, {"title", d.title}, {"text", d.text}}.dump() + "\n";
    }
    return out;
}

std::string dataset_jsonl(const std::vector<QAExample>& dataset) {
    std::string out;
    for (const auto& ex : dataset) {
        out += json{{"id", ex.id}, {"question", ex.question}, {"answers", ex.gold_answers}}.dump() + "\n";
    }
    return out;
}

}  // namespace subqrag::testing
