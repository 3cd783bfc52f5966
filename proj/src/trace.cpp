#include <nlohmann/json.hpp>

#include "subqrag/solver.hpp"

namespace subqrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

ojson triple_json(const Triple& t) {
    ojson j;
    j["id"] = t.id;
    j["head"] = t.head;
    j["relation"] = t.relation;
    j["tail"] = t.tail;
    j["provenance"] = t.provenance;
    j["step"] = t.created_at_step;
    return j;
}

ojson scored_json(const std::vector<ScoredKey>& v) {
    ojson arr = ojson::array();
    for (const auto& s : v) {
        ojson j;
        j["triple_id"] = s.key;
        j["score"] = s.score;
        arr.push_back(std::move(j));
    }
    return arr;
}

ojson fallback_json(const FallbackEvent& e) {
    ojson j;
    j["retrieved_doc_ids"] = e.retrieved_doc_ids;
    ojson triples = ojson::array();
    for (const auto& t : e.new_triples) triples.push_back(ojson::array({t.head, t.relation, t.tail}));
    j["new_triples"] = std::move(triples);
    j["written_back_ids"] = e.written_back_ids;
    j["events"] = e.events;
    return j;
}

// Small structural checker: records the path of every missing or mistyped field.
class Checker {
public:
    std::vector<std::string> problems;

    const json* field(const json& obj, const std::string& path, const char* name,
                      json::value_t type) {
        const std::string where = path + "." + name;
        if (!obj.is_object()) {
            problems.push_back(path + " is not an object");
            return nullptr;
        }
        auto it = obj.find(name);
        if (it == obj.end()) {
            problems.push_back(where + " is missing");
            return nullptr;
        }
        if (!same_kind(*it, type)) {
            problems.push_back(where + " has type " + it->type_name());
            return nullptr;
        }
        return &*it;
    }

    void int_array(const json& obj, const std::string& path, const char* name) {
        if (const json* a = field(obj, path, name, json::value_t::array)) {
            for (const auto& v : *a) {
                if (!v.is_number_integer()) problems.push_back(path + "." + name + " holds a non-integer");
            }
        }
    }

    void string_array(const json& obj, const std::string& path, const char* name) {
        if (const json* a = field(obj, path, name, json::value_t::array)) {
            for (const auto& v : *a) {
                if (!v.is_string()) problems.push_back(path + "." + name + " holds a non-string");
            }
        }
    }

private:
    static bool same_kind(const json& v, json::value_t type) {
        switch (type) {
            case json::value_t::number_integer:
            case json::value_t::number_unsigned: return v.is_number_integer();
            case json::value_t::number_float: return v.is_number();
            default: return v.type() == type;
        }
    }
};

}  // namespace

ojson trace_to_json(const QuestionTrace& trace) {
    ojson j;
    j["question_id"] = trace.question_id;
    j["original_question"] = trace.original_question;

    ojson plan;
    plan["sub_questions"] = trace.plan.sub_questions;
    plan["degraded"] = trace.plan.degraded;
    plan["events"] = trace.plan.events;
    j["plan"] = std::move(plan);

    ojson steps = ojson::array();
    for (const auto& sa : trace.sub_answers) {
        ojson s;
        s["index"] = sa.index;
        s["sub_question"] = sa.sub_question;
        s["rewritten_question"] = sa.rewritten_question;
        s["rewrite_used_llm"] = sa.rewrite_used_llm;
        s["retrieved"] = scored_json(sa.retrieved);
        s["re_retrieved"] = scored_json(sa.re_retrieved);
        s["answer"] = sa.answer;
        s["answerable_from_graph"] = sa.answerable_from_graph;
        s["resolution"] = sa.resolution;
        s["used_triple_ids"] = sa.used_triple_ids;
        s["fallback"] = sa.fallback ? fallback_json(*sa.fallback) : ojson(nullptr);
        s["events"] = sa.events;
        steps.push_back(std::move(s));
    }
    j["sub_answers"] = std::move(steps);

    ojson memory = ojson::array();
    for (const auto& e : trace.memory.entries) {
        ojson m;
        m["step"] = e.step;
        m["triple"] = triple_json(e.triple);
        memory.push_back(std::move(m));
    }
    j["memory"] = std::move(memory);
    j["final_answer"] = trace.final_answer;

    ojson counters;
    counters["llm_calls"] = trace.llm_calls;
    counters["llm_budget"] = trace.llm_budget;
    counters["retries"] = trace.retries;
    counters["prompt_tokens"] = trace.usage.prompt_tokens;
    counters["completion_tokens"] = trace.usage.completion_tokens;
    counters["graph_size_before"] = trace.graph_size_before;
    counters["graph_size_after"] = trace.graph_size_after;
    if (trace.elapsed_ms) counters["elapsed_ms"] = *trace.elapsed_ms;
    j["counters"] = std::move(counters);

    if (trace.error_kind) {
        ojson err;
        err["kind"] = *trace.error_kind;
        err["message"] = trace.error_message.value_or("");
        j["error"] = std::move(err);
    } else {
        j["error"] = nullptr;
    }
    return j;
}

std::vector<std::string> validate_trace_json(const json& j) {
    using vt = json::value_t;
    Checker c;
    const std::string root = "$";
    c.field(j, root, "question_id", vt::string);
    c.field(j, root, "original_question", vt::string);
    c.field(j, root, "final_answer", vt::string);

    std::size_t plan_len = 0;
    if (const json* plan = c.field(j, root, "plan", vt::object)) {
        c.string_array(*plan, "$.plan", "sub_questions");
        c.field(*plan, "$.plan", "degraded", vt::boolean);
        c.string_array(*plan, "$.plan", "events");
        if (plan->contains("sub_questions") && (*plan)["sub_questions"].is_array()) {
            plan_len = (*plan)["sub_questions"].size();
            if (plan_len == 0) c.problems.push_back("$.plan.sub_questions is empty");
        }
    }

    std::size_t steps = 0;
    if (const json* arr = c.field(j, root, "sub_answers", vt::array)) {
        steps = arr->size();
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const json& s = (*arr)[i];
            const std::string p = "$.sub_answers[" + std::to_string(i) + "]";
            c.field(s, p, "index", vt::number_integer);
            c.field(s, p, "sub_question", vt::string);
            c.field(s, p, "rewritten_question", vt::string);
            c.field(s, p, "answer", vt::string);
            c.field(s, p, "resolution", vt::string);
            c.int_array(s, p, "used_triple_ids");
            c.string_array(s, p, "events");
            for (const char* list : {"retrieved", "re_retrieved"}) {
                if (const json* r = c.field(s, p, list, vt::array)) {
                    for (const auto& hit : *r) {
                        c.field(hit, p + "." + list + "[]", "triple_id", vt::number_integer);
                        c.field(hit, p + "." + list + "[]", "score", vt::number_float);
                    }
                }
            }
            const json* from_graph = c.field(s, p, "answerable_from_graph", vt::boolean);
            auto fb = s.is_object() ? s.find("fallback") : s.end();
            if (!s.is_object() || fb == s.end()) {
                c.problems.push_back(p + ".fallback is missing");
            } else if (fb->is_object()) {
                c.string_array(*fb, p + ".fallback", "retrieved_doc_ids");
                c.int_array(*fb, p + ".fallback", "written_back_ids");
                c.string_array(*fb, p + ".fallback", "events");
                if (const json* nt = c.field(*fb, p + ".fallback", "new_triples", vt::array)) {
                    for (const auto& t : *nt) {
                        if (!t.is_array() || t.size() != 3) {
                            c.problems.push_back(p + ".fallback.new_triples holds a non-triple");
                        }
                    }
                }
            } else if (!fb->is_null()) {
                c.problems.push_back(p + ".fallback must be an object or null");
            } else if (from_graph && !from_graph->get<bool>()) {
                c.problems.push_back(p + " is not answered from the graph but has no fallback");
            }
        }
    }

    if (const json* mem = c.field(j, root, "memory", vt::array)) {
        for (const auto& e : *mem) {
            c.field(e, "$.memory[]", "step", vt::number_integer);
            if (const json* t = c.field(e, "$.memory[]", "triple", vt::object)) {
                c.field(*t, "$.memory[].triple", "id", vt::number_integer);
                c.field(*t, "$.memory[].triple", "head", vt::string);
                c.field(*t, "$.memory[].triple", "relation", vt::string);
                c.field(*t, "$.memory[].triple", "tail", vt::string);
                c.field(*t, "$.memory[].triple", "provenance", vt::string);
            }
        }
    }

    if (const json* counters = c.field(j, root, "counters", vt::object)) {
        for (const char* name : {"llm_calls", "llm_budget", "retries", "prompt_tokens",
                                 "completion_tokens", "graph_size_before", "graph_size_after"}) {
            c.field(*counters, "$.counters", name, vt::number_integer);
        }
        if (counters->contains("llm_calls") && counters->contains("llm_budget") &&
            (*counters)["llm_calls"].is_number_integer() &&
            (*counters)["llm_budget"].is_number_integer() &&
            (*counters)["llm_calls"].get<long>() > (*counters)["llm_budget"].get<long>()) {
            c.problems.push_back("$.counters.llm_calls exceeds the budget");
        }
    }

    bool aborted = false;
    if (!j.is_object() || !j.contains("error")) {
        c.problems.push_back("$.error is missing");
    } else if (j["error"].is_object()) {
        aborted = true;
        c.field(j["error"], "$.error", "kind", vt::string);
        c.field(j["error"], "$.error", "message", vt::string);
    } else if (!j["error"].is_null()) {
        c.problems.push_back("$.error must be an object or null");
    }
    if (!aborted && plan_len != steps) {
        c.problems.push_back("sub_answers length differs from plan without a recorded error");
    }
    return c.problems;
}

}  // namespace subqrag
