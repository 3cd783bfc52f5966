#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace subqrag {

struct QAExample {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
};

// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
// whitespace.
std::string normalize_answer(std::string_view s);

int exact_match(std::string_view prediction, const std::vector<std::string>& golds);

// Multiset token overlap F1 on normalized strings, max over golds.
double token_f1(std::string_view prediction, const std::vector<std::string>& golds);

enum class DatasetFormat { Generic, HotpotQA, MuSiQue, TwoWiki };

// Throws UnsupportedFormat.
DatasetFormat dataset_format_from_string(std::string_view name);
std::string_view to_string(DatasetFormat format);

// Accepts either line-JSON or a single JSON array for every format.
// Throws IoError, ParseError (line for line-JSON, record index for arrays).
std::vector<QAExample> load_dataset(const std::filesystem::path& path, DatasetFormat format);

struct SolveOutcome {
    std::string prediction;
    bool failed = false;
    std::string error;
    std::optional<nlohmann::ordered_json> trace;
};

using SolveFunction = std::function<SolveOutcome(const QAExample&)>;

struct ExampleResult {
    std::string id;
    std::string prediction;
    int em = 0;
    double f1 = 0.0;
    bool failed = false;
    std::string error;
};

struct RunReport {
    std::string dataset_name;
    std::string method = "SubQRAG";
    std::size_t n = 0;
    double em = 0.0;  // percent
    double f1 = 0.0;  // percent
    std::vector<ExampleResult> per_example;
    std::vector<std::optional<nlohmann::ordered_json>> traces;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();

    nlohmann::ordered_json to_json() const;
};

// Solves every example (up to `parallelism` at once); results keep dataset
// order. Exceptions and failed outcomes score zero. Throws EmptyDataset.
RunReport run_benchmark(const std::vector<QAExample>& dataset, const SolveFunction& solve,
                        int parallelism = 1);

struct ReferenceScore {
    std::string method;
    std::string dataset;
    double em = 0.0;
    double f1 = 0.0;
};

// Published SubQRAG scores (gpt-4o-mini, 1,000 questions per dataset) and
// the HotpotQA ablations, shown next to a run for orientation only.
const std::vector<ReferenceScore>& reference_scores();

// Fixed-width "Method | EM | F1" table for the run plus matching reference rows.
std::string format_report_table(const RunReport& report);

// Writes report.json, report.txt and traces/<n>_<id>.json under `dir`.
void write_report(const RunReport& report, const std::filesystem::path& dir);

}  // namespace subqrag
