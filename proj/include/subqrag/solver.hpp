#pragma once
// Per-question solving loop: decompose, then for each sub-question rewrite,
// retrieve top-k triples and answer from them; fall back to corpus passages
// when the triples are insufficient, writing newly extracted triples back
// into the graph. The triples actually used form the graph memory handed to
// the final answer call.

#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subqrag/decomposer.hpp"
#include "subqrag/indexer.hpp"
#include "subqrag/kg_store.hpp"
#include "subqrag/llm_gateway.hpp"
#include "subqrag/vector_index.hpp"

namespace subqrag {

inline constexpr std::string_view kUnknownAnswer = "UNKNOWN";

// Graph, indexes and corpus behind one reader/writer lock. Retrieval holds
// the shared side; write-backs take the exclusive side so the graph and the
// triple index change together.
struct Stores {
    KnowledgeGraph graph;
    VectorIndex triple_index;
    VectorIndex passage_index;
    Corpus corpus;
    mutable std::shared_mutex mutex;

    Stores() = default;
    Stores(KnowledgeGraph g, VectorIndex triples, VectorIndex passages, Corpus c)
        : graph(std::move(g)), triple_index(std::move(triples)),
          passage_index(std::move(passages)), corpus(std::move(c)) {}
};

struct SolverConfig {
    std::size_t k_triples = 5;
    std::size_t k_docs = 5;
    int max_sub_questions = kDefaultMaxSubQuestions;
    int llm_budget = 25;
    // Ablation switches.
    bool decomposition = true;
    bool rewriting = true;
    bool graph_update = true;
    // Wall-clock timing makes traces non-reproducible, so it is opt-in.
    bool record_timing = false;
};

struct Candidate {
    Triple triple;
    double score = 0.0;
};

struct TripleAnswer {
    bool answerable = false;
    std::string answer;
    std::vector<TripleId> used_triple_ids;
    std::vector<std::string> events;
};

struct FallbackEvent {
    std::vector<std::string> retrieved_doc_ids;
    std::vector<RawTriple> new_triples;
    std::vector<TripleId> written_back_ids;
    std::vector<std::string> events;
};

struct DocAnswer {
    std::string answer;
    FallbackEvent event;
};

struct SubAnswer {
    int index = 0;  // 1-based
    std::string sub_question;
    std::string rewritten_question;
    bool rewrite_used_llm = false;
    std::vector<ScoredKey> retrieved;
    std::vector<ScoredKey> re_retrieved;
    std::string answer;
    bool answerable_from_graph = false;
    // "graph", "graph_after_update" or "documents".
    std::string resolution;
    std::vector<TripleId> used_triple_ids;
    std::optional<FallbackEvent> fallback;
    std::vector<std::string> events;
};

struct MemoryEntry {
    int step = 0;
    Triple triple;
};

struct GraphMemory {
    std::vector<MemoryEntry> entries;

    std::vector<TripleId> ids() const;
};

struct QuestionTrace {
    std::string question_id;
    std::string original_question;
    DecompositionPlan plan;
    std::vector<SubAnswer> sub_answers;
    GraphMemory memory;
    std::string final_answer;
    int llm_calls = 0;
    int llm_budget = 0;
    int retries = 0;
    TokenUsage usage;
    std::size_t graph_size_before = 0;
    std::size_t graph_size_after = 0;
    std::optional<std::string> error_kind;
    std::optional<std::string> error_message;
    std::optional<double> elapsed_ms;
};

// Exact top-k over the triple index under the shared lock.
std::vector<ScoredKey> retrieve_for_subquestion(const std::string& question, const Stores& stores,
                                                std::size_t k, const Embedder& embedder);

// Resolves retrieved ids to triples under the shared lock.
std::vector<Candidate> resolve_candidates(const std::vector<ScoredKey>& retrieved,
                                          const Stores& stores);

// "id. head | relation | tail" per line.
std::string render_candidates(const std::vector<Candidate>& candidates);

// Empty candidates short-circuit to unanswerable without a model call. Ids
// outside the candidates are dropped; "answerable" without evidence (or
// without an answer) is coerced to unanswerable. Parse failures count as
// unanswerable. BudgetExceeded propagates.
TripleAnswer answer_from_triples(const std::string& question,
                                 const std::vector<Candidate>& candidates, LlmClient& client);

// Document-level fallback. Answers from the top-k_docs passages and, when
// `extract` is set, extracts candidate triples from them. Model failures
// yield UNKNOWN / no triples with an event; BudgetExceeded propagates.
DocAnswer fallback_answer_from_docs(const std::string& question, const Stores& stores,
                                    LlmClient& client, const Embedder& embedder,
                                    std::size_t k_docs, bool extract = true);

// Inserts event.new_triples with provenance "dynamic:<question_id>" and
// embeds the genuinely new ones, all under the exclusive lock. Returns the
// event with written_back_ids filled in.
FallbackEvent update_graph_with_new_triples(Stores& stores, FallbackEvent event,
                                            const std::string& question_id, int step,
                                            const Embedder& embedder);

// Ordered union of used ids (earliest step wins). Throws UnknownId.
GraphMemory assemble_graph_memory(const std::vector<SubAnswer>& sub_answers,
                                  const KnowledgeGraph& graph);

// "step i: head | relation | tail" per line, or a no-evidence marker.
std::string render_memory(const GraphMemory& memory);

// LLM failure -> UNKNOWN. BudgetExceeded propagates.
std::string generate_final_answer(const std::string& question, const GraphMemory& memory,
                                  LlmClient& client);

// Runs the whole loop. Budget exhaustion and missing dependencies end the
// question early with error_kind set and final_answer UNKNOWN.
QuestionTrace solve(const std::string& question_id, const std::string& question,
                    const SolverConfig& config, Stores& stores, LlmClient& client,
                    const Embedder& embedder);

// Stable-order JSON for a trace, and a structural check of that JSON
// (returns the list of problems; empty means valid).
nlohmann::ordered_json trace_to_json(const QuestionTrace& trace);
std::vector<std::string> validate_trace_json(const nlohmann::json& j);

}  // namespace subqrag
