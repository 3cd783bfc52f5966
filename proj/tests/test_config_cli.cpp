#include <doctest.h>

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "subqrag/cli.hpp"
#include "subqrag/config.hpp"
#include "subqrag/errors.hpp"
#include "subqrag/kg_store.hpp"
#include "subqrag/solver.hpp"
#include "support/fixtures.hpp"

using namespace subqrag;
using subqrag::testing::TempDir;
using subqrag::testing::read_file;
using subqrag::testing::write_file;
using nlohmann::json;

namespace {

struct CliRun {
    int code = -1;
    std::string out;
    std::string err;
};

// A scratch workspace holding the two-hop corpus and its stub script.
struct Workspace {
    TempDir dir;
    std::map<std::string, std::string> env;

    Workspace() {
        write_file(dir / "corpus.jsonl", subqrag::testing::corpus_jsonl(subqrag::testing::inception_corpus()));
        write_file(dir / "script.json", subqrag::testing::inception_script().to_json().dump(2));
    }

    std::vector<std::string> globals() const {
        return {"--backend", "stub", "--stub-script", (dir / "script.json").string(),
                "--snapshot", (dir / "snap").string(), "--run-dir", (dir / "runs").string()};
    }

    CliRun run(std::vector<std::string> args, bool with_globals = true) const {
        std::vector<std::string> full = with_globals ? globals() : std::vector<std::string>{};
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        CliRun r;
        r.code = cli::run(full, out, err, [this](const char* name) -> const char* {
            auto it = env.find(name);
            return it == env.end() ? nullptr : it->second.c_str();
        });
        r.out = out.str();
        r.err = err.str();
        return r;
    }

    void index() const {
        const auto r = run({"index", "--corpus", (dir / "corpus.jsonl").string()});
        REQUIRE(r.code == 0);
    }
};

}  // namespace

TEST_CASE("config file and environment precedence") {
    TempDir dir;
    write_file(dir / "c.json", R"({"k_triples": 7, "k_docs": 3, "model": "file-model", "graph_update": false})");
    Config c;
    apply_config_file(c, dir / "c.json");
    CHECK(c.k_triples == 7);
    CHECK(c.k_docs == 3);
    CHECK_FALSE(c.graph_update);

    std::map<std::string, std::string> env = {{"SUBQRAG_K_TRIPLES", "8"}, {"OPENAI_API_KEY", "sk-env"}};
    apply_environment(c, [&](const char* n) -> const char* {
        auto it = env.find(n);
        return it == env.end() ? nullptr : it->second.c_str();
    });
    CHECK(c.k_triples == 8);
    CHECK(c.k_docs == 3);
    CHECK(c.model == "file-model");
    CHECK(c.api_key == "sk-env");
    CHECK_FALSE(c.to_json().contains("api_key"));

    const SolverConfig sc = c.solver_config();
    CHECK(sc.k_triples == 8);
    CHECK_FALSE(sc.graph_update);

    write_file(dir / "unknown.json", R"({"k_tripels": 7})");
    Config d;
    CHECK_THROWS_AS(apply_config_file(d, dir / "unknown.json"), ConfigError);
    write_file(dir / "typed.json", R"({"k_triples": "seven"})");
    CHECK_THROWS_AS(apply_config_file(d, dir / "typed.json"), ConfigError);

    Config bad;
    bad.k_triples = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(Config{}.validate());
    CHECK(Config{}.k_triples == 5);
    CHECK(Config{}.llm_budget == 25);
}

TEST_CASE("cli index") {
    Workspace ws;
    auto r = ws.run({"index", "--corpus", (ws.dir / "corpus.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(std::filesystem::exists(ws.dir / "snap" / "graph.jsonl"));
    CHECK(std::filesystem::exists(ws.dir / "snap" / "manifest.json"));
    const auto manifest = json::parse(read_file(ws.dir / "snap" / "manifest.json"));
    CHECK(manifest["triples"] == 4);

    r = ws.run({"index", "--corpus", (ws.dir / "corpus.jsonl").string()});
    CHECK(r.code == 3);
    r = ws.run({"index", "--corpus", (ws.dir / "corpus.jsonl").string(), "--force"});
    CHECK(r.code == 0);

    r = ws.run({"index", "--corpus", (ws.dir / "missing.jsonl").string()});
    CHECK(r.code == 2);
    r = ws.run({"index"});
    CHECK(r.code == 2);

    write_file(ws.dir / "broken.jsonl", "{not json\n");
    r = ws.run({"index", "--corpus", (ws.dir / "broken.jsonl").string(), "--force"});
    CHECK(r.code == 4);
}

TEST_CASE("cli ask") {
    Workspace ws;
    auto r = ws.run({"ask", subqrag::testing::kInceptionQuestion});
    CHECK(r.code == 3);
    CHECK(r.err.find("subqrag index") != std::string::npos);

    ws.index();
    r = ws.run({"ask", subqrag::testing::kInceptionQuestion, "--id", "q1", "--trace", "--show-memory"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("Emma Thomas\n", 0) == 0);
    CHECK(r.out.find("step 2: Christopher Nolan | spouse | Emma Thomas") != std::string::npos);
    const auto trace = json::parse(read_file(ws.dir / "runs" / "ask_q1.json"));
    CHECK(validate_trace_json(trace).empty());
    CHECK(trace["final_answer"] == "Emma Thomas");

    // Without --persist-updates the snapshot is untouched.
    CHECK(snapshot_load(ws.dir / "snap" / "graph.jsonl").size() == 4);
    r = ws.run({"ask", subqrag::testing::kInceptionQuestion, "--id", "q2", "--persist-updates"});
    CHECK(r.code == 0);
    const KnowledgeGraph g = snapshot_load(ws.dir / "snap" / "graph.jsonl");
    CHECK(g.size() == 5);
    CHECK(g.lookup(4).provenance == "dynamic:q2");

    // Global flags are accepted after the subcommand too.
    r = ws.run({"ask", "Who directed Inception?", "--llm-budget", "1"}, false);
    CHECK(r.code == 3);
    r = ws.run({"ask", subqrag::testing::kInceptionQuestion, "--llm-budget", "2"});
    CHECK(r.code == 4);
    CHECK(r.out.rfind("UNKNOWN", 0) == 0);
}

TEST_CASE("cli eval") {
    Workspace ws;
    auto bench = subqrag::testing::make_synthetic_bench(4);
    bench.dataset.resize(4);
    bench.dataset[3].gold_answers = {"Nobody Known"};
    write_file(ws.dir / "corpus.jsonl", subqrag::testing::corpus_jsonl(bench.corpus));
    write_file(ws.dir / "script.json", bench.script.to_json().dump());
    write_file(ws.dir / "data.jsonl", subqrag::testing::dataset_jsonl(bench.dataset));
    ws.index();
    // The offline person-document rules are single-use within one process;
    // drop them so the eval process reaches the fallback extraction rules.
    auto& rules = bench.script.rules;
    rules.erase(std::remove_if(rules.begin(), rules.end(),
                               [](const StubRule& rule) {
                                   const auto it = rule.when.find("passage");
                                   return it != rule.when.end() &&
                                          it->second.front().find(" is a filmmaker") != std::string::npos;
                               }),
                rules.end());
    write_file(ws.dir / "script.json", bench.script.to_json().dump());

    auto r = ws.run({"eval", "--dataset", (ws.dir / "data.jsonl").string(), "--output",
                     (ws.dir / "report").string(), "--parallelism", "1", "--k-docs", "1"});
    CHECK(r.code == 0);
    CHECK(r.out.find("EM 75.00 F1 75.00") != std::string::npos);
    const auto report = json::parse(read_file(ws.dir / "report" / "report.json"));
    CHECK(report["config"]["k_triples"] == 5);
    CHECK(report["n"] == 4);

    r = ws.run({"eval", "--dataset", (ws.dir / "data.jsonl").string(), "--format", "squad"});
    CHECK(r.code == 2);
    r = ws.run({"eval", "--dataset", (ws.dir / "nope.jsonl").string()});
    CHECK(r.code == 2);

    ws.env["SUBQRAG_K_TRIPLES"] = "4";
    r = ws.run({"eval", "--dataset", (ws.dir / "data.jsonl").string(), "--output",
                (ws.dir / "report2").string(), "--k-triples", "3"});
    CHECK(r.code == 0);
    CHECK(json::parse(read_file(ws.dir / "report2" / "report.json"))["config"]["k_triples"] == 3);
}

TEST_CASE("cli graph") {
    Workspace ws;
    auto r = ws.run({"graph", "stats"});
    CHECK(r.code == 3);
    ws.index();

    r = ws.run({"graph", "stats"});
    CHECK(r.code == 0);
    CHECK(r.out == "triples 4\nentities 5\ndynamic 0\n");

    r = ws.run({"graph", "export", "--output", (ws.dir / "export.jsonl").string()});
    CHECK(r.code == 0);
    CHECK(snapshot_load(ws.dir / "export.jsonl") == snapshot_load(ws.dir / "snap" / "graph.jsonl"));

    r = ws.run({"graph", "export", "--format", "edgelist"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("Inception\tdirected by\tChristopher Nolan\n", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);

    r = ws.run({"graph", "export", "--format", "dot"});
    CHECK(r.code == 2);
    r = ws.run({"graph"});
    CHECK(r.code == 2);
}

TEST_CASE("cli usage errors") {
    Workspace ws;
    CHECK(ws.run({}).code == 2);
    CHECK(ws.run({"frobnicate"}).code == 2);
    CHECK(ws.run({"--k-triples", "0", "graph", "stats"}).code == 2);
    CHECK(ws.run({"--config", (ws.dir / "absent.json").string(), "graph", "stats"}).code == 2);
    CHECK(ws.run({"--help"}, false).code == 0);
}
