#include "subqrag/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"
#include "subqrag/text.hpp"

namespace subqrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    std::map<std::string_view, int> counts;
    for (const auto& t : gold) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<std::string> gold_list(const json& v) {
    std::vector<std::string> out;
    if (v.is_string()) {
        out.push_back(v.get<std::string>());
    } else if (v.is_array()) {
        for (const auto& a : v) {
            if (a.is_string()) out.push_back(a.get<std::string>());
            else if (a.is_number()) out.push_back(a.dump());
        }
    } else if (v.is_number() || v.is_boolean()) {
        out.push_back(v.dump());
    }
    return out;
}

std::string string_or_number(const json& obj, std::initializer_list<const char*> names) {
    for (const char* n : names) {
        auto it = obj.find(n);
        if (it == obj.end()) continue;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number_integer()) return it->dump();
    }
    return {};
}

// `where` is the line number (line-JSON) or 1-based record index (array).
QAExample adapt(const json& r, DatasetFormat format, std::size_t where) {
    if (!r.is_object()) throw ParseError(where, "record is not a JSON object");
    QAExample ex;
    ex.id = string_or_number(r, {"id", "_id", "qid"});
    if (ex.id.empty()) ex.id = "q" + std::to_string(where);
    auto q = r.find("question");
    if (q == r.end() || !q->is_string() || text::trim(q->get<std::string>()).empty()) {
        throw ParseError(where, "missing \"question\"");
    }
    ex.question = q->get<std::string>();

    switch (format) {
        case DatasetFormat::Generic:
            if (r.contains("answers")) ex.gold_answers = gold_list(r["answers"]);
            else if (r.contains("answer")) ex.gold_answers = gold_list(r["answer"]);
            break;
        case DatasetFormat::MuSiQue:
            if (r.contains("answer")) ex.gold_answers = gold_list(r["answer"]);
            if (r.contains("answer_aliases")) {
                for (auto& a : gold_list(r["answer_aliases"])) ex.gold_answers.push_back(std::move(a));
            }
            break;
        case DatasetFormat::HotpotQA:
        case DatasetFormat::TwoWiki:
            if (r.contains("answer")) ex.gold_answers = gold_list(r["answer"]);
            else if (r.contains("answers")) ex.gold_answers = gold_list(r["answers"]);
            break;
    }
    if (ex.gold_answers.empty()) throw ParseError(where, "missing gold answer");
    return ex;
}

}  // namespace

std::string normalize_answer(std::string_view s) {
    std::string lowered = text::casefold(s);
    std::string no_punct;
    no_punct.reserve(lowered.size());
    for (char c : lowered) {
        if (kPunctuation.find(c) == std::string_view::npos) no_punct.push_back(c);
    }
    std::string out;
    for (const auto& tok : text::split_whitespace(no_punct)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(std::string_view prediction, const std::vector<std::string>& golds) {
    const std::string p = normalize_answer(prediction);
    for (const auto& g : golds) {
        if (normalize_answer(g) == p) return 1;
    }
    return 0;
}

double token_f1(std::string_view prediction, const std::vector<std::string>& golds) {
    const auto pred = text::split_whitespace(normalize_answer(prediction));
    double best = 0.0;
    for (const auto& g : golds) {
        best = std::max(best, f1_single(pred, text::split_whitespace(normalize_answer(g))));
    }
    return best;
}

DatasetFormat dataset_format_from_string(std::string_view name) {
    if (name == "generic") return DatasetFormat::Generic;
    if (name == "hotpotqa") return DatasetFormat::HotpotQA;
    if (name == "musique") return DatasetFormat::MuSiQue;
    if (name == "2wiki") return DatasetFormat::TwoWiki;
    throw UnsupportedFormat("unsupported dataset format: " + std::string(name));
}

std::string_view to_string(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::Generic: return "generic";
        case DatasetFormat::HotpotQA: return "hotpotqa";
        case DatasetFormat::MuSiQue: return "musique";
        case DatasetFormat::TwoWiki: return "2wiki";
    }
    return "unknown";
}

std::vector<QAExample> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string content = ss.str();

    std::vector<QAExample> out;
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '[') {
        json arr = json::parse(content, nullptr, false);
        if (arr.is_discarded()) throw ParseError(0, "dataset is not valid JSON");
        for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(adapt(arr[i], format, i + 1));
        return out;
    }
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(content)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json r = json::parse(line, nullptr, false);
        if (r.is_discarded()) throw ParseError(line_no, "invalid JSON");
        out.push_back(adapt(r, format, line_no));
    }
    return out;
}

ojson RunReport::to_json() const {
    ojson j;
    j["dataset"] = dataset_name;
    j["method"] = method;
    j["n"] = n;
    j["em"] = em;
    j["f1"] = f1;
    j["config"] = config;
    ojson refs = ojson::array();
    for (const auto& r : reference_scores()) {
        if (r.dataset != dataset_name) continue;
        refs.push_back(ojson{{"method", r.method}, {"dataset", r.dataset}, {"em", r.em}, {"f1", r.f1}});
    }
    j["published_reference"] = std::move(refs);
    ojson rows = ojson::array();
    for (const auto& e : per_example) {
        ojson row;
        row["id"] = e.id;
        row["prediction"] = e.prediction;
        row["em"] = e.em;
        row["f1"] = e.f1;
        row["failed"] = e.failed;
        if (e.failed) row["error"] = e.error;
        rows.push_back(std::move(row));
    }
    j["per_example"] = std::move(rows);
    return j;
}

RunReport run_benchmark(const std::vector<QAExample>& dataset, const SolveFunction& solve,
                        int parallelism) {
    if (dataset.empty()) throw EmptyDataset();
    RunReport report;
    report.n = dataset.size();
    report.per_example.resize(dataset.size());
    report.traces.resize(dataset.size());

    auto work = [&](std::size_t i) {
        const QAExample& ex = dataset[i];
        ExampleResult& r = report.per_example[i];
        r.id = ex.id;
        SolveOutcome outcome;
        try {
            outcome = solve(ex);
        } catch (const std::exception& e) {
            outcome.failed = true;
            outcome.error = e.what();
        }
        r.prediction = outcome.prediction;
        r.failed = outcome.failed;
        r.error = outcome.error;
        if (!r.failed) {
            r.em = exact_match(r.prediction, ex.gold_answers);
            r.f1 = token_f1(r.prediction, ex.gold_answers);
        } else {
            spdlog::warn("question {} failed: {}", ex.id, r.error);
        }
        report.traces[i] = std::move(outcome.trace);
    };

    const auto workers = static_cast<std::size_t>(std::max(1, parallelism));
    if (workers == 1) {
        for (std::size_t i = 0; i < dataset.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, dataset.size()); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < dataset.size(); i = next++) work(i);
            });
        }
    }

    double em_sum = 0.0;
    double f1_sum = 0.0;
    for (const auto& r : report.per_example) {
        em_sum += r.em;
        f1_sum += r.f1;
    }
    report.em = 100.0 * em_sum / static_cast<double>(report.n);
    report.f1 = 100.0 * f1_sum / static_cast<double>(report.n);
    return report;
}

const std::vector<ReferenceScore>& reference_scores() {
    static const std::vector<ReferenceScore> refs = {
        {"SubQRAG (published)", "musique", 29.70, 38.14},
        {"SubQRAG (published)", "2wiki", 61.90, 64.30},
        {"SubQRAG (published)", "hotpotqa", 56.00, 64.30},
        {"w/o Decomposition (published)", "hotpotqa", 50.5, 59.6},
        {"w/o Rewriting (published)", "hotpotqa", 49.5, 50.2},
        {"w/o Update (published)", "hotpotqa", 54.5, 63.7},
    };
    return refs;
}

std::string format_report_table(const RunReport& report) {
    std::vector<std::tuple<std::string, double, double>> rows;
    rows.emplace_back(report.method, report.em, report.f1);
    for (const auto& r : reference_scores()) {
        if (r.dataset == report.dataset_name) rows.emplace_back(r.method, r.em, r.f1);
    }
    std::size_t width = std::string_view("Method").size();
    for (const auto& [m, em, f1] : rows) width = std::max(width, m.size());

    std::string out = fmt::format("Dataset: {} (n={})\n", report.dataset_name, report.n);
    out += fmt::format("{:<{}}  {:>6}  {:>6}\n", "Method", width, "EM", "F1");
    out += std::string(width + 16, '-') + "\n";
    for (const auto& [m, em, f1] : rows) {
        out += fmt::format("{:<{}}  {:>6.2f}  {:>6.2f}\n", m, width, em, f1);
    }
    return out;
}

void write_report(const RunReport& report, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "traces", ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    auto write = [](const std::filesystem::path& p, const std::string& body) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + p.string());
        out << body;
        if (!out) throw IoError("write failed for " + p.string());
    };
    write(dir / "report.json", report.to_json().dump(2, ' ', false, json::error_handler_t::replace) + "\n");
    write(dir / "report.txt", format_report_table(report));
    for (std::size_t i = 0; i < report.traces.size(); ++i) {
        if (!report.traces[i]) continue;
        std::string safe;
        for (char c : report.per_example[i].id) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                            c == '-' || c == '_';
            safe.push_back(ok ? c : '_');
        }
        write(dir / "traces" / fmt::format("{:05}_{}.json", i, safe),
              report.traces[i]->dump(2, ' ', false, json::error_handler_t::replace) + "\n");
    }
}

}  // namespace subqrag
