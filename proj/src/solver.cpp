#include "subqrag/solver.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <set>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

using json = nlohmann::json;

namespace {

std::vector<TripleId> candidate_ids(const std::vector<ScoredKey>& v) {
    std::vector<TripleId> ids;
    ids.reserve(v.size());
    for (const auto& s : v) ids.push_back(s.key);
    return ids;
}

std::string first_line_answer(std::string_view raw) {
    for (const auto& line : text::split_lines(raw)) {
        std::string t = text::trim(line);
        if (t.empty()) continue;
        if (t.size() >= 2 && t.front() == '"' && t.back() == '"') {
            t = text::trim(std::string_view(t).substr(1, t.size() - 2));
        }
        return t;
    }
    return {};
}

}  // namespace

std::vector<TripleId> GraphMemory::ids() const {
    std::vector<TripleId> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.triple.id);
    return out;
}

std::vector<ScoredKey> retrieve_for_subquestion(const std::string& question, const Stores& stores,
                                                std::size_t k, const Embedder& embedder) {
    const Embedding query = embedder.embed(question);
    std::shared_lock lock(stores.mutex);
    if (stores.triple_index.empty()) return {};
    return stores.triple_index.top_k(query, k);
}

std::vector<Candidate> resolve_candidates(const std::vector<ScoredKey>& retrieved,
                                          const Stores& stores) {
    std::shared_lock lock(stores.mutex);
    std::vector<Candidate> out;
    out.reserve(retrieved.size());
    for (const auto& r : retrieved) out.push_back({stores.graph.lookup(r.key), r.score});
    return out;
}

std::string render_candidates(const std::vector<Candidate>& candidates) {
    std::string out;
    for (const auto& c : candidates) {
        out += std::to_string(c.triple.id) + ". " + c.triple.head + " | " + c.triple.relation +
               " | " + c.triple.tail + "\n";
    }
    return out;
}

TripleAnswer answer_from_triples(const std::string& question,
                                 const std::vector<Candidate>& candidates, LlmClient& client) {
    TripleAnswer result;
    if (candidates.empty()) {
        result.events.push_back("no candidate triples");
        return result;
    }

    ChatRequest req;
    req.template_name = TemplateName::AnswerFromTriples;
    req.variables["question"] = question;
    req.variables["triples"] = render_candidates(candidates);
    req.max_tokens = 256;

    StructuredResult res;
    try {
        res = complete_structured(client, req,
                                  StructuredShape::object({{"answerable", FieldKind::Boolean},
                                                           {"answer", FieldKind::String},
                                                           {"used_triple_ids", FieldKind::Array}}));
    } catch (const LlmError& e) {
        result.events.push_back(std::string("answer_from_triples failed: ") + e.what());
        return result;
    }
    if (res.attempts > 1) result.events.push_back("answer_from_triples parsed after JSON-only retry");

    std::set<TripleId> allowed;
    for (const auto& c : candidates) allowed.insert(c.triple.id);

    std::vector<TripleId> used;
    for (const auto& v : res.value["used_triple_ids"]) {
        if (!v.is_number_integer()) {
            result.events.push_back("ignored non-integer used id " + v.dump());
            continue;
        }
        const auto id = v.get<TripleId>();
        if (!allowed.contains(id)) {
            spdlog::warn("model cited triple {} which was not a candidate", id);
            result.events.push_back("filtered used id " + std::to_string(id) + " (not a candidate)");
            continue;
        }
        if (std::find(used.begin(), used.end(), id) == used.end()) used.push_back(id);
    }

    const bool claimed = res.value["answerable"].get<bool>();
    std::string answer = text::trim(res.value["answer"].get<std::string>());
    if (claimed && used.empty()) {
        result.events.push_back("answerable claim without valid evidence coerced to unanswerable");
        return result;
    }
    if (claimed && answer.empty()) {
        result.events.push_back("answerable claim with empty answer coerced to unanswerable");
        return result;
    }
    if (!claimed) return result;

    result.answerable = true;
    result.answer = std::move(answer);
    result.used_triple_ids = std::move(used);
    return result;
}

DocAnswer fallback_answer_from_docs(const std::string& question, const Stores& stores,
                                    LlmClient& client, const Embedder& embedder,
                                    std::size_t k_docs, bool extract) {
    DocAnswer out;
    out.answer = std::string(kUnknownAnswer);

    std::vector<std::string> passages;
    {
        const Embedding query = embedder.embed(question);
        std::shared_lock lock(stores.mutex);
        if (stores.corpus.empty() || stores.passage_index.empty()) {
            out.event.events.push_back("fallback degraded: corpus is empty");
            return out;
        }
        for (const auto& hit : stores.passage_index.top_k(query, k_docs)) {
            const Document& doc = stores.corpus.at(static_cast<std::size_t>(hit.key));
            out.event.retrieved_doc_ids.push_back(doc.id);
            passages.push_back(passage_text(doc));
        }
    }

    std::string rendered;
    for (std::size_t i = 0; i < passages.size(); ++i) {
        rendered += "[" + std::to_string(i + 1) + "] " + passages[i] + "\n\n";
    }

    ChatRequest req;
    req.template_name = TemplateName::AnswerFromDocs;
    req.variables["question"] = question;
    req.variables["passages"] = rendered;
    req.max_tokens = 128;
    try {
        const auto res =
            complete_structured(client, req, StructuredShape::object({{"answer", FieldKind::String}}));
        const std::string answer = text::trim(res.value["answer"].get<std::string>());
        if (!answer.empty()) out.answer = answer;
        else out.event.events.push_back("documents did not contain an answer");
    } catch (const LlmError& e) {
        out.event.events.push_back(std::string("answer_from_docs failed: ") + e.what());
    }

    if (!extract) return out;
    std::string joined;
    for (const auto& p : passages) {
        if (!joined.empty()) joined += "\n\n";
        joined += p;
    }
    try {
        std::vector<std::string> dropped;
        out.event.new_triples = extract_triples(joined, client, &dropped);
        for (const auto& d : dropped) out.event.events.push_back("dropped extracted item " + d);
    } catch (const LlmError& e) {
        out.event.events.push_back(std::string("fallback extraction failed: ") + e.what());
    }
    return out;
}

FallbackEvent update_graph_with_new_triples(Stores& stores, FallbackEvent event,
                                            const std::string& question_id, int step,
                                            const Embedder& embedder) {
    event.written_back_ids.clear();
    if (event.new_triples.empty()) return event;

    std::vector<std::pair<std::string, Embedding>> embedded;
    embedded.reserve(event.new_triples.size());
    for (const auto& t : event.new_triples) {
        std::string verbal = verbalize_triple(t);
        Embedding e = embedder.embed(verbal);
        embedded.emplace_back(std::move(verbal), std::move(e));
    }

    const std::string provenance = std::string(kDynamicProvenancePrefix) + question_id;
    std::unique_lock lock(stores.mutex);
    for (std::size_t i = 0; i < event.new_triples.size(); ++i) {
        const auto& t = event.new_triples[i];
        if (!is_valid_triple(t.head, t.relation, t.tail)) continue;
        const auto res = stores.graph.insert_triple(t.head, t.relation, t.tail, provenance, step);
        if (!res.inserted) continue;
        stores.triple_index.upsert(res.id, verbalize_triple(stores.graph.lookup(res.id)),
                                   std::move(embedded[i].second));
        event.written_back_ids.push_back(res.id);
    }
    if (stores.triple_index.embedder_name().empty()) {
        stores.triple_index.set_embedder_name(embedder.name());
    }
    return event;
}

GraphMemory assemble_graph_memory(const std::vector<SubAnswer>& sub_answers,
                                  const KnowledgeGraph& graph) {
    GraphMemory memory;
    std::unordered_set<TripleId> seen;
    for (const auto& sa : sub_answers) {
        for (TripleId id : sa.used_triple_ids) {
            if (!seen.insert(id).second) continue;
            memory.entries.push_back({sa.index, graph.lookup(id)});
        }
    }
    return memory;
}

std::string render_memory(const GraphMemory& memory) {
    if (memory.entries.empty()) return "(no evidence retrieved)\n";
    std::string out;
    for (const auto& e : memory.entries) {
        out += "step " + std::to_string(e.step) + ": " + e.triple.head + " | " + e.triple.relation +
               " | " + e.triple.tail + "\n";
    }
    return out;
}

std::string generate_final_answer(const std::string& question, const GraphMemory& memory,
                                  LlmClient& client) {
    ChatRequest req;
    req.template_name = TemplateName::FinalAnswer;
    req.variables["question"] = question;
    req.variables["memory"] = render_memory(memory);
    req.max_tokens = 64;
    try {
        std::string answer = first_line_answer(client.complete(req).text);
        return answer.empty() ? std::string(kUnknownAnswer) : answer;
    } catch (const LlmError& e) {
        spdlog::warn("final answer generation failed: {}", e.what());
        return std::string(kUnknownAnswer);
    }
}

namespace {

SubAnswer solve_step(int index, const std::string& sub_question, const AnswerContext& context,
                     const std::string& question_id, const SolverConfig& config, Stores& stores,
                     LlmClient& client, const Embedder& embedder) {
    SubAnswer sa;
    sa.index = index;
    sa.sub_question = sub_question;

    const RewriteResult rw = rewrite(sub_question, context, client, config.rewriting);
    sa.rewritten_question = rw.question;
    sa.rewrite_used_llm = rw.used_llm;
    if (rw.degraded) sa.events.push_back("rewrite degraded to literal substitution");

    sa.retrieved = retrieve_for_subquestion(sa.rewritten_question, stores, config.k_triples, embedder);
    TripleAnswer ta =
        answer_from_triples(sa.rewritten_question, resolve_candidates(sa.retrieved, stores), client);
    sa.events.insert(sa.events.end(), ta.events.begin(), ta.events.end());
    if (ta.answerable) {
        sa.answer = std::move(ta.answer);
        sa.answerable_from_graph = true;
        sa.used_triple_ids = std::move(ta.used_triple_ids);
        sa.resolution = "graph";
        return sa;
    }

    DocAnswer doc = fallback_answer_from_docs(sa.rewritten_question, stores, client, embedder,
                                              config.k_docs, config.graph_update);
    FallbackEvent event = std::move(doc.event);
    if (config.graph_update) {
        event = update_graph_with_new_triples(stores, std::move(event), question_id, index, embedder);
        sa.re_retrieved =
            retrieve_for_subquestion(sa.rewritten_question, stores, config.k_triples, embedder);
        if (candidate_ids(sa.re_retrieved) != candidate_ids(sa.retrieved)) {
            TripleAnswer again = answer_from_triples(
                sa.rewritten_question, resolve_candidates(sa.re_retrieved, stores), client);
            sa.events.insert(sa.events.end(), again.events.begin(), again.events.end());
            if (again.answerable) {
                sa.answer = std::move(again.answer);
                sa.answerable_from_graph = true;
                sa.used_triple_ids = std::move(again.used_triple_ids);
                sa.resolution = "graph_after_update";
                sa.fallback = std::move(event);
                return sa;
            }
        } else {
            sa.events.push_back("re-retrieval unchanged; skipped second answer attempt");
        }
    }

    sa.answer = std::move(doc.answer);
    sa.answerable_from_graph = false;
    sa.used_triple_ids = event.written_back_ids;
    sa.resolution = "documents";
    sa.fallback = std::move(event);
    return sa;
}

}  // namespace

QuestionTrace solve(const std::string& question_id, const std::string& question,
                    const SolverConfig& config, Stores& stores, LlmClient& client,
                    const Embedder& embedder) {
    const auto started = std::chrono::steady_clock::now();
    QuestionTrace trace;
    trace.question_id = question_id;
    trace.original_question = question;
    trace.llm_budget = config.llm_budget;
    {
        std::shared_lock lock(stores.mutex);
        trace.graph_size_before = stores.graph.size();
    }

    BudgetedClient budgeted(client, config.llm_budget);
    try {
        trace.plan = config.decomposition
                         ? decompose(question, budgeted, config.max_sub_questions)
                         : single_step_plan(question);
        AnswerContext context;
        for (std::size_t i = 0; i < trace.plan.sub_questions.size(); ++i) {
            const int index = static_cast<int>(i) + 1;
            SubAnswer sa = solve_step(index, trace.plan.sub_questions[i], context, question_id,
                                      config, stores, budgeted, embedder);
            context.append(index, sa.answer);
            trace.sub_answers.push_back(std::move(sa));
        }
        {
            std::shared_lock lock(stores.mutex);
            trace.memory = assemble_graph_memory(trace.sub_answers, stores.graph);
        }
        trace.final_answer = generate_final_answer(question, trace.memory, budgeted);
    } catch (const BudgetExceeded& e) {
        trace.error_kind = "BudgetExceeded";
        trace.error_message = e.what();
    } catch (const MissingDependency& e) {
        trace.error_kind = "MissingDependency";
        trace.error_message = e.what();
    } catch (const ValidationError& e) {
        trace.error_kind = "ValidationError";
        trace.error_message = e.what();
    }

    if (trace.error_kind) {
        spdlog::warn("question {} aborted: {}", question_id, *trace.error_message);
        if (trace.plan.sub_questions.empty()) trace.plan.original_question = question;
        std::shared_lock lock(stores.mutex);
        trace.memory = assemble_graph_memory(trace.sub_answers, stores.graph);
        trace.final_answer = std::string(kUnknownAnswer);
    }

    trace.llm_calls = budgeted.calls();
    trace.retries = budgeted.retries();
    trace.usage = budgeted.usage();
    {
        std::shared_lock lock(stores.mutex);
        trace.graph_size_after = stores.graph.size();
    }
    if (config.record_timing) {
        trace.elapsed_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - started)
                               .count();
    }
    return trace;
}

}  // namespace subqrag
