#pragma once
// Shared test fixtures: scripted gateways, a two-hop film corpus and a
// generated multi-question benchmark whose stub answers are known exactly.

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "subqrag/eval.hpp"
#include "subqrag/indexer.hpp"
#include "subqrag/llm_gateway.hpp"
#include "subqrag/solver.hpp"

namespace subqrag::testing {

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& body);
std::string read_file(const std::filesystem::path& path);

StubRule make_rule(TemplateName name, std::map<std::string, std::vector<std::string>> when,
                   std::vector<std::string> responses, bool repeat = false);

TemplateRegistry default_templates();
std::unique_ptr<Gateway> make_stub_gateway(StubScript script, int max_in_flight = 4);

// Runs the offline indexer and wraps the result.
std::unique_ptr<Stores> build_stores(const Corpus& corpus, LlmClient& client,
                                     const Embedder& embedder, int parallelism = 1);

// "Who is the spouse of the director of Inception?" over three documents.
// The spouse fact is only reachable through the document fallback.
inline constexpr const char* kInceptionQuestion = "Who is the spouse of the director of Inception?";
Corpus inception_corpus();
StubScript inception_script();

struct SyntheticBench {
    Corpus corpus;
    StubScript script;
    std::vector<QAExample> dataset;
    std::size_t offline_triples = 0;
    // Questions whose spouse fact is missing offline and must be written back.
    std::size_t needs_update = 0;
    // One passage per fallback so the scripted extraction sees a single
    // person document; with more, several extraction rules would match.
    SolverConfig config;
};

// n two-hop questions over invented names. Even-numbered questions are
// answerable from the offline graph; odd ones need the fallback.
SyntheticBench make_synthetic_bench(int n);

// Full-scan reference for top_k: plain dot products over explicitly computed
// norms, stable sort by (score desc, key asc).
std::vector<ScoredKey> brute_force_top_k(const std::vector<std::pair<std::int64_t, std::vector<double>>>& items,
                                         const std::vector<double>& query, std::size_t k);

std::string corpus_jsonl(const Corpus& corpus);
std::string dataset_jsonl(const std::vector<QAExample>& dataset);

}  // namespace subqrag::testing
