#include "subqrag/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "subqrag/errors.hpp"
#include "subqrag/eval.hpp"
#include "subqrag/indexer.hpp"
#include "subqrag/snapshot.hpp"
#include "subqrag/solver.hpp"

namespace subqrag::cli {

namespace fs = std::filesystem;

namespace {

// Flag values; unset optionals leave the lower-precedence value alone.
struct Overrides {
    std::optional<std::string> backend;
    std::optional<std::string> endpoint;
    std::optional<std::string> model;
    std::optional<std::string> embedder;
    std::optional<std::size_t> embedding_dimension;
    std::optional<std::size_t> k_triples;
    std::optional<std::size_t> k_docs;
    std::optional<int> max_subquestions;
    std::optional<int> llm_budget;
    std::optional<int> parallelism;
    std::optional<std::string> templates_dir;
    std::optional<std::string> snapshot_dir;
    std::optional<std::string> run_dir;
    std::optional<std::string> stub_script;
    std::optional<std::string> wire_log;
    bool no_decomposition = false;
    bool no_rewriting = false;
    bool no_update = false;

    void apply(Config& c) const {
        if (backend) c.backend = backend_from_string(*backend);
        if (endpoint) c.endpoint = *endpoint;
        if (model) c.model = *model;
        if (embedder) c.embedder = *embedder;
        if (embedding_dimension) c.embedding_dimension = *embedding_dimension;
        if (k_triples) c.k_triples = *k_triples;
        if (k_docs) c.k_docs = *k_docs;
        if (max_subquestions) c.max_subquestions = *max_subquestions;
        if (llm_budget) c.llm_budget = *llm_budget;
        if (parallelism) c.parallelism = *parallelism;
        if (templates_dir) c.templates_dir = *templates_dir;
        if (snapshot_dir) c.snapshot_dir = *snapshot_dir;
        if (run_dir) c.run_dir = *run_dir;
        if (stub_script) c.stub_script = *stub_script;
        if (wire_log) c.wire_log = *wire_log;
        if (no_decomposition) c.decomposition = false;
        if (no_rewriting) c.rewriting = false;
        if (no_update) c.graph_update = false;
    }
};

struct UsageError : Error {
    using Error::Error;
};

struct MissingArtifact : Error {
    using Error::Error;
};

std::string method_name(const Config& c) {
    std::vector<std::string> off;
    if (!c.decomposition) off.emplace_back("Decomposition");
    if (!c.rewriting) off.emplace_back("Rewriting");
    if (!c.graph_update) off.emplace_back("Update");
    if (off.empty()) return "SubQRAG";
    std::string out = "w/o ";
    for (std::size_t i = 0; i < off.size(); ++i) out += (i ? " + " : "") + off[i];
    return out;
}

std::unique_ptr<Stores> require_stores(const Config& config, const Embedder& embedder) {
    const SnapshotPaths paths{config.snapshot_dir};
    if (!paths.exists()) {
        throw MissingArtifact("no index snapshot at " + paths.dir.string() +
                              "; build one first with: subqrag index --corpus <corpus.jsonl>");
    }
    return load_stores(paths, embedder);
}

void write_text(const fs::path& path, const std::string& body) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
    if (!out) throw IoError("write failed for " + path.string());
}

std::string safe_name(std::string_view s) {
    std::string out;
    for (char c : s) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "question" : out;
}

int cmd_index(const Config& config, const fs::path& corpus_path, bool force, std::ostream& out) {
    if (corpus_path.empty() || !fs::exists(corpus_path)) {
        throw UsageError("corpus file not found: " + corpus_path.string());
    }
    const SnapshotPaths paths{config.snapshot_dir};
    if (paths.exists() && !force) {
        throw MissingArtifact("snapshot already exists at " + paths.dir.string() +
                              "; pass --force to overwrite");
    }
    Corpus corpus = ingest_corpus(corpus_path);
    auto embedder = make_embedder(config);
    auto gateway = make_gateway(config);

    IndexerOptions opts;
    opts.char_budget = config.char_budget;
    opts.parallelism = config.parallelism;
    IndexBuild build = build_graph_index(corpus, *gateway, *embedder, opts);
    const auto manifest = make_index_manifest(corpus_path, *embedder, build);
    const IndexReport report = build.report;

    Stores stores(std::move(build.graph), std::move(build.triple_index),
                  std::move(build.passage_index), std::move(corpus));
    save_stores(stores, paths, manifest);

    out << fmt::format(
        "indexed {} documents: {} triples extracted, {} stored, {} duplicates, {} failures\n",
        report.documents_processed, report.triples_extracted, report.triples_stored,
        report.duplicates_skipped, report.failures.size());
    for (const auto& f : report.failures) out << "  extraction failed: " << f << "\n";
    out << "snapshot written to " << paths.dir.string() << "\n";
    return kExitOk;
}

int cmd_ask(const Config& config, const std::string& question, const std::string& question_id,
            bool write_trace, bool show_memory, bool persist, std::ostream& out) {
    if (question.empty()) throw UsageError("question is empty");
    auto embedder = make_embedder(config);
    auto stores = require_stores(config, *embedder);
    auto gateway = make_gateway(config);

    const QuestionTrace trace =
        solve(question_id, question, config.solver_config(), *stores, *gateway, *embedder);
    out << trace.final_answer << "\n";
    if (show_memory) {
        out << "graph memory:\n";
        if (trace.memory.entries.empty()) out << "  (empty)\n";
        for (const auto& e : trace.memory.entries) {
            out << fmt::format("  step {}: {} | {} | {}\n", e.step, e.triple.head,
                               e.triple.relation, e.triple.tail);
        }
    }
    if (write_trace) {
        const fs::path path = config.run_dir / ("ask_" + safe_name(question_id) + ".json");
        write_text(path, trace_to_json(trace).dump(2, ' ', false,
                                                   nlohmann::json::error_handler_t::replace) +
                             "\n");
        out << "trace: " << path.string() << "\n";
    }
    if (persist && trace.graph_size_after > trace.graph_size_before) {
        save_graph_and_triples(*stores, SnapshotPaths{config.snapshot_dir});
    }
    if (trace.error_kind) {
        spdlog::error("question aborted: {}", trace.error_message.value_or(""));
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_eval(const Config& config, const fs::path& dataset_path, const std::string& format_name,
             std::size_t limit, const std::string& output_dir, bool persist, std::ostream& out) {
    DatasetFormat format;
    try {
        format = dataset_format_from_string(format_name);
    } catch (const UnsupportedFormat& e) {
        throw UsageError(e.what());
    }
    if (!fs::exists(dataset_path)) throw UsageError("dataset not found: " + dataset_path.string());
    auto embedder = make_embedder(config);
    auto stores = require_stores(config, *embedder);
    auto dataset = load_dataset(dataset_path, format);
    if (limit > 0 && dataset.size() > limit) dataset.resize(limit);
    auto gateway = make_gateway(config);

    const SolverConfig solver_cfg = config.solver_config();
    RunReport report = run_benchmark(
        dataset,
        [&](const QAExample& ex) {
            QuestionTrace trace = solve(ex.id, ex.question, solver_cfg, *stores, *gateway, *embedder);
            SolveOutcome o;
            o.prediction = trace.final_answer;
            if (trace.error_kind) {
                o.failed = true;
                o.error = *trace.error_kind + ": " + trace.error_message.value_or("");
            }
            o.trace = trace_to_json(trace);
            return o;
        },
        config.parallelism);
    report.dataset_name = std::string(to_string(format));
    report.method = method_name(config);
    report.config = config.to_json();
    report.config["dataset_path"] = dataset_path.string();

    const fs::path dir = output_dir.empty()
                             ? config.run_dir / ("eval_" + safe_name(dataset_path.stem().string()))
                             : fs::path(output_dir);
    write_report(report, dir);
    if (persist) save_graph_and_triples(*stores, SnapshotPaths{config.snapshot_dir});

    out << format_report_table(report);
    out << fmt::format("EM {:.2f} F1 {:.2f}\n", report.em, report.f1);
    out << "report: " << (dir / "report.json").string() << "\n";
    return kExitOk;
}

int cmd_graph(const Config& config, const std::string& sub, const std::string& format,
              const std::string& output, std::ostream& out) {
    const SnapshotPaths paths{config.snapshot_dir};
    if (!paths.exists()) {
        throw MissingArtifact("no graph snapshot at " + paths.dir.string() +
                              "; build one first with: subqrag index --corpus <corpus.jsonl>");
    }
    const KnowledgeGraph graph = snapshot_load(paths.graph());
    if (sub == "stats") {
        const GraphStats s = graph.stats();
        out << "triples " << s.triple_count << "\n";
        out << "entities " << s.entity_count << "\n";
        out << "dynamic " << s.dynamic_count << "\n";
        return kExitOk;
    }
    std::string body;
    if (format == "json") {
        for (const auto& t : graph.triples()) body += triple_to_json_line(t) + "\n";
    } else if (format == "edgelist") {
        for (const auto& t : graph.triples()) body += t.head + "\t" + t.relation + "\t" + t.tail + "\n";
    } else {
        throw UsageError("unknown export format: " + format);
    }
    if (output.empty()) {
        out << body;
    } else {
        write_text(output, body);
        out << "exported " << graph.size() << " triples to " << output << "\n";
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const EnvLookup& env) {
    CLI::App app{"Sub-question driven graph RAG: index a corpus, answer multi-hop questions, evaluate."};
    app.require_subcommand(1);
    // Global flags may also follow the subcommand.
    app.fallthrough();

    std::string config_path;
    Overrides ov;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--backend", ov.backend, "remote or stub");
    app.add_option("--endpoint", ov.endpoint, "chat completions URL");
    app.add_option("--model", ov.model, "model name");
    app.add_option("--embedder", ov.embedder, "hashing or remote");
    app.add_option("--embedding-dimension", ov.embedding_dimension);
    app.add_option("--k-triples", ov.k_triples, "triples retrieved per sub-question");
    app.add_option("--k-docs", ov.k_docs, "passages retrieved on fallback");
    app.add_option("--max-subquestions", ov.max_subquestions);
    app.add_option("--llm-budget", ov.llm_budget, "LLM calls allowed per question");
    app.add_option("--parallelism", ov.parallelism);
    app.add_option("--templates", ov.templates_dir, "prompt template directory");
    app.add_option("--snapshot", ov.snapshot_dir, "index snapshot directory");
    app.add_option("--run-dir", ov.run_dir, "where traces and reports go");
    app.add_option("--stub-script", ov.stub_script, "scripted responses for the stub backend");
    app.add_option("--wire-log", ov.wire_log, "append every LLM exchange to this file");
    app.add_flag("--no-decomposition", ov.no_decomposition, "answer the question as one step");
    app.add_flag("--no-rewriting", ov.no_rewriting, "literal #j substitution only");
    app.add_flag("--no-update", ov.no_update, "never write fallback triples back");

    auto* index = app.add_subcommand("index", "build the graph and indexes from a corpus");
    std::string corpus_path;
    bool force = false;
    index->add_option("--corpus", corpus_path, "line-JSON corpus")->required();
    index->add_flag("--force", force, "overwrite an existing snapshot");

    auto* ask = app.add_subcommand("ask", "answer one question");
    std::string question;
    std::string question_id = "ask";
    bool trace_flag = false;
    bool show_memory = false;
    bool persist_ask = false;
    ask->add_option("question", question, "the question")->required();
    ask->add_option("--id", question_id, "question id used in provenance and file names");
    ask->add_flag("--trace", trace_flag, "write the question trace JSON");
    ask->add_flag("--show-memory", show_memory, "print the graph memory");
    ask->add_flag("--persist-updates", persist_ask, "save written-back triples to the snapshot");

    auto* eval = app.add_subcommand("eval", "run a benchmark and report EM/F1");
    std::string dataset_path;
    std::string format = "generic";
    std::size_t limit = 0;
    std::string output_dir;
    bool persist_eval = false;
    eval->add_option("--dataset", dataset_path, "dataset file")->required();
    eval->add_option("--format", format, "generic, hotpotqa, musique or 2wiki");
    eval->add_option("--limit", limit, "only the first N questions");
    eval->add_option("--output", output_dir, "report directory");
    eval->add_flag("--persist-updates", persist_eval, "save written-back triples to the snapshot");

    auto* graph = app.add_subcommand("graph", "inspect the knowledge graph");
    graph->require_subcommand(1);
    auto* stats = graph->add_subcommand("stats", "triple, entity and dynamic triple counts");
    auto* exp = graph->add_subcommand("export", "write the graph as line-JSON or an edge list");
    std::string export_format = "json";
    std::string export_output;
    exp->add_option("--format", export_format, "json or edgelist");
    exp->add_option("--output", export_output, "output file (default: stdout)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const bool help = dynamic_cast<const CLI::CallForHelp*>(&e) != nullptr ||
                          dynamic_cast<const CLI::CallForAllHelp*>(&e) != nullptr;
        app.exit(e, out, err);
        return help ? kExitOk : kExitUsage;
    }

    try {
        Config config;
        if (!config_path.empty()) {
            if (!fs::exists(config_path)) throw UsageError("config file not found: " + config_path);
            apply_config_file(config, config_path);
        }
        apply_environment(config, env);
        ov.apply(config);
        config.validate();

        if (*index) return cmd_index(config, corpus_path, force, out);
        if (*ask) return cmd_ask(config, question, question_id, trace_flag, show_memory, persist_ask, out);
        if (*eval) return cmd_eval(config, dataset_path, format, limit, output_dir, persist_eval, out);
        if (*stats) return cmd_graph(config, "stats", export_format, export_output, out);
        if (*exp) return cmd_graph(config, "export", export_format, export_output, out);
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const MissingArtifact& e) {
        err << "error: " << e.what() << "\n";
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace subqrag::cli
