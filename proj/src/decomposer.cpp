#include "subqrag/decomposer.hpp"

#include <regex>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

namespace {

const std::regex& placeholder_regex() {
    static const std::regex re("#([0-9]{1,9})");
    return re;
}

std::string render_answers(const AnswerContext& context) {
    std::string out;
    for (const auto& [index, answer] : context.answers) {
        out += std::to_string(index) + ". " + answer + "\n";
    }
    if (out.empty()) out = "(none)\n";
    return out;
}

// Takes the first non-empty line and strips wrapping quotes.
std::string clean_rewrite(std::string_view raw) {
    for (const auto& line : text::split_lines(raw)) {
        std::string t = text::trim(line);
        if (t.empty()) continue;
        if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) {
            t = text::trim(std::string_view(t).substr(1, t.size() - 2));
        }
        return t;
    }
    return {};
}

}  // namespace

void AnswerContext::append(int index, std::string answer) {
    if (!answers.empty() && index <= answers.back().first) {
        throw std::invalid_argument("answer indices must increase");
    }
    answers.emplace_back(index, std::move(answer));
}

const std::string* AnswerContext::find(int index) const {
    for (const auto& [i, a] : answers) {
        if (i == index) return &a;
    }
    return nullptr;
}

std::vector<int> placeholder_refs(std::string_view sub_question) {
    std::vector<int> refs;
    const std::string s(sub_question);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), placeholder_regex());
         it != std::sregex_iterator(); ++it) {
        refs.push_back(std::stoi((*it)[1].str()));
    }
    return refs;
}

void validate_plan(const std::vector<std::string>& sub_questions) {
    if (sub_questions.empty()) throw ValidationError("decomposition is empty");
    for (std::size_t i = 0; i < sub_questions.size(); ++i) {
        const int step = static_cast<int>(i) + 1;
        if (text::trim(sub_questions[i]).empty()) {
            throw ValidationError("sub-question " + std::to_string(step) + " is empty");
        }
        for (int ref : placeholder_refs(sub_questions[i])) {
            if (ref < 1 || ref >= step) {
                throw ValidationError("sub-question " + std::to_string(step) + " references #" +
                                      std::to_string(ref));
            }
        }
    }
}

DecompositionPlan single_step_plan(const std::string& question) {
    DecompositionPlan plan;
    plan.original_question = question;
    plan.sub_questions = {question};
    return plan;
}

DecompositionPlan decompose(const std::string& question, LlmClient& client, int max_sub_questions) {
    if (text::trim(question).empty()) throw ValidationError("question is empty");
    DecompositionPlan plan;
    plan.original_question = question;

    ChatRequest req;
    req.template_name = TemplateName::Decompose;
    req.variables["question"] = question;
    req.max_tokens = 256;

    std::vector<std::string> steps;
    try {
        const StructuredResult res = complete_structured(client, req, StructuredShape::array());
        if (res.attempts > 1) plan.events.push_back("decompose: parsed after JSON-only retry");
        for (const auto& item : res.value) {
            if (!item.is_string()) throw ValidationError("decomposition item is not a string");
            steps.push_back(text::trim(item.get<std::string>()));
        }
        const auto cap = static_cast<std::size_t>(std::max(1, max_sub_questions));
        if (steps.size() > cap) {
            spdlog::warn("decomposition has {} steps; truncating to {}", steps.size(), cap);
            plan.events.push_back("decompose: truncated " + std::to_string(steps.size()) +
                                  " sub-questions to " + std::to_string(cap));
            steps.resize(cap);
        }
        validate_plan(steps);
    } catch (const LlmError& e) {
        plan.events.push_back(std::string("decompose degraded: ") + e.what());
        plan.degraded = true;
    } catch (const ValidationError& e) {
        plan.events.push_back(std::string("decompose degraded: ") + e.what());
        plan.degraded = true;
    }

    if (plan.degraded) {
        spdlog::warn("decomposition failed; answering as a single question");
        plan.sub_questions = {question};
    } else {
        plan.sub_questions = std::move(steps);
    }
    return plan;
}

std::string substitute_placeholders(std::string_view sub_question, const AnswerContext& context) {
    const std::string s(sub_question);
    std::string out;
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), placeholder_regex());
         it != std::sregex_iterator(); ++it) {
        const int ref = std::stoi((*it)[1].str());
        const std::string* answer = context.find(ref);
        if (!answer) throw MissingDependency(ref);
        out.append(s, last, static_cast<std::size_t>(it->position()) - last);
        out += *answer;
        last = static_cast<std::size_t>(it->position() + it->length());
    }
    out.append(s, last);
    return out;
}

RewriteResult rewrite(const std::string& sub_question, const AnswerContext& context,
                      LlmClient& client, bool use_llm) {
    const bool has_refs = !placeholder_refs(sub_question).empty();
    RewriteResult result;
    result.question = substitute_placeholders(sub_question, context);
    if ((!has_refs && context.empty()) || !use_llm) return result;

    ChatRequest req;
    req.template_name = TemplateName::Rewrite;
    req.variables["subquestion"] = result.question;
    req.variables["answers"] = render_answers(context);
    req.max_tokens = 128;
    try {
        const ChatResponse resp = client.complete(req);
        result.used_llm = true;
        std::string cleaned = clean_rewrite(resp.text);
        if (cleaned.empty() || !placeholder_refs(cleaned).empty()) {
            result.degraded = true;
        } else {
            result.question = std::move(cleaned);
        }
    } catch (const LlmError& e) {
        spdlog::warn("rewrite failed, keeping literal substitution: {}", e.what());
        result.degraded = true;
    }
    return result;
}

}  // namespace subqrag
