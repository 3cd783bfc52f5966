#pragma once
// Question decomposition and dependency-aware rewriting.
//
// Sub-questions refer to earlier answers with "#j" (1-based). Rewriting first
// substitutes those literally, then asks the model to smooth the result into
// a self-contained question.

#include <string>
#include <utility>
#include <vector>

#include "subqrag/llm_gateway.hpp"

namespace subqrag {

struct DecompositionPlan {
    std::string original_question;
    std::vector<std::string> sub_questions;
    // Warnings (truncation) and degradations (fallback to the single question).
    std::vector<std::string> events;
    bool degraded = false;
};

struct AnswerContext {
    // (1-based sub-question index, answer), indices strictly increasing.
    std::vector<std::pair<int, std::string>> answers;

    // Throws std::invalid_argument if `index` does not increase.
    void append(int index, std::string answer);
    const std::string* find(int index) const;
    bool empty() const noexcept { return answers.empty(); }
};

// "#j" references in order of appearance (duplicates kept).
std::vector<int> placeholder_refs(std::string_view sub_question);

// Throws ValidationError on an empty plan, an empty step, or a reference to
// the current or a later step.
void validate_plan(const std::vector<std::string>& sub_questions);

inline constexpr int kDefaultMaxSubQuestions = 6;

// Never throws for model failures: a parse or validation failure degrades to
// [question] with an event recorded. BudgetExceeded propagates.
DecompositionPlan decompose(const std::string& question, LlmClient& client,
                            int max_sub_questions = kDefaultMaxSubQuestions);

// Plan used when decomposition is switched off.
DecompositionPlan single_step_plan(const std::string& question);

// Replaces every "#j" with answer j. Throws MissingDependency.
std::string substitute_placeholders(std::string_view sub_question, const AnswerContext& context);

struct RewriteResult {
    std::string question;
    bool used_llm = false;
    bool degraded = false;  // LLM failed or produced nothing usable
};

// Identity (no model call) when there are no placeholders and no context.
// With use_llm = false only the literal substitution is applied.
RewriteResult rewrite(const std::string& sub_question, const AnswerContext& context,
                      LlmClient& client, bool use_llm = true);

}  // namespace subqrag
