#include <doctest.h>

#include <nlohmann/json.hpp>

#include "subqrag/errors.hpp"
#include "subqrag/eval.hpp"
#include "support/fixtures.hpp"

using namespace subqrag;
using subqrag::testing::TempDir;
using subqrag::testing::read_file;
using subqrag::testing::write_file;
using nlohmann::json;

TEST_CASE("normalize_answer") {
    CHECK(normalize_answer("The Eiffel Tower!") == "eiffel tower");
    CHECK(normalize_answer("an  apple") == "apple");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("  A.B.C. ") == "abc");
    CHECK(normalize_answer("Theater") == "theater");
    CHECK(normalize_answer("ÉMILE Zola") == "émile zola");
}

TEST_CASE("exact_match") {
    CHECK(exact_match("Emma Thomas", {"emma thomas"}) == 1);
    CHECK(exact_match("Emma", {"Emma Thomas"}) == 0);
    CHECK(exact_match("The Emma Thomas", {"emma thomas."}) == 1);
    CHECK(exact_match("x", {"y", "X"}) == 1);
}

TEST_CASE("token_f1") {
    CHECK(token_f1("Obama", {"Barack Obama"}) == doctest::Approx(2.0 / 3.0));
    CHECK(token_f1("x", {"y"}) == 0.0);
    // "a" is an article, so this is [b b] against [b b c].
    CHECK(token_f1("a b b", {"b b c"}) == doctest::Approx(0.8));
    CHECK(token_f1("x y y", {"y y z"}) == doctest::Approx(2.0 / 3.0));
    CHECK(token_f1("", {""}) == 1.0);
    CHECK(token_f1("the", {"a"}) == 1.0);
    CHECK(token_f1("", {"x"}) == 0.0);
    CHECK(token_f1("x", {"y", "x z"}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("metric properties") {
    const std::vector<std::string> samples = {"Emma Thomas", "the cat sat", "a b b c", "Paris, France",
                                              "1999", "New York City"};
    for (const auto& p : samples) {
        CHECK(token_f1(p, {p}) == 1.0);
        CHECK(exact_match(" " + p + " ", {p}) == 1);
        for (const auto& g : samples) {
            const double f = token_f1(p, {g});
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
            if (exact_match(p, {g})) CHECK(f == 1.0);
            CHECK(token_f1(p, {g, "zz"}) == token_f1(p, {"zz", g}));
        }
    }
}

TEST_CASE("load_dataset formats") {
    TempDir dir;
    write_file(dir / "g.jsonl",
               R"({"id":"q1","question":"Who?","answers":["A","B"]})" "\n"
               R"({"id":"q2","question":"What?","answers":["C"]})" "\n");
    auto g = load_dataset(dir / "g.jsonl", DatasetFormat::Generic);
    REQUIRE(g.size() == 2);
    CHECK(g[0].gold_answers == std::vector<std::string>{"A", "B"});

    write_file(dir / "h.json", R"([{"_id":"h1","question":"Capital?","answer":"Paris"}])");
    auto h = load_dataset(dir / "h.json", DatasetFormat::HotpotQA);
    REQUIRE(h.size() == 1);
    CHECK(h[0].id == "h1");
    CHECK(h[0].gold_answers == std::vector<std::string>{"Paris"});

    write_file(dir / "m.jsonl",
               R"({"id":"m1","question":"Q","answer":"Emma Thomas","answer_aliases":["Emma Nolan"]})" "\n");
    auto m = load_dataset(dir / "m.jsonl", DatasetFormat::MuSiQue);
    CHECK(m[0].gold_answers == std::vector<std::string>{"Emma Thomas", "Emma Nolan"});

    write_file(dir / "w.json", R"([{"_id":"w1","question":"Q","answer":"yes"}])");
    CHECK(load_dataset(dir / "w.json", DatasetFormat::TwoWiki)[0].gold_answers ==
          std::vector<std::string>{"yes"});

    write_file(dir / "bad.jsonl", R"({"id":"q1","question":"Who?","answers":["A"]})" "\n"
                                  R"({"id":"q2","answers":["A"]})" "\n");
    try {
        load_dataset(dir / "bad.jsonl", DatasetFormat::Generic);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK(dataset_format_from_string("2wiki") == DatasetFormat::TwoWiki);
    CHECK_THROWS_AS(dataset_format_from_string("squad"), UnsupportedFormat);
}

TEST_CASE("run_benchmark aggregates in dataset order") {
    std::vector<QAExample> ds = {
        {"q1", "one", {"Emma Thomas"}},
        {"q2", "two", {"Paris"}},
        {"q3", "three", {"1999"}},
        {"q4", "four", {"Christopher Nolan"}},
    };
    const std::map<std::string, std::string> answers = {
        {"one", "Emma Thomas"}, {"two", "paris"}, {"three", "1999."}, {"four", "UNKNOWN"}};
    const RunReport r = run_benchmark(
        ds,
        [&](const QAExample& ex) {
            SolveOutcome o;
            o.prediction = answers.at(ex.question);
            return o;
        },
        3);
    CHECK(r.n == 4);
    CHECK(r.em == doctest::Approx(75.0).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(75.0).epsilon(1e-12));
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(r.per_example[i].id == ds[i].id);
    CHECK(r.per_example[3].em == 0);

    CHECK_THROWS_AS(run_benchmark({}, [](const QAExample&) { return SolveOutcome{}; }), EmptyDataset);
}

TEST_CASE("run_benchmark scores failures as zero") {
    std::vector<QAExample> ds = {{"a", "ok", {"x"}}, {"b", "throw", {"x"}}, {"c", "fail", {"x"}}};
    const RunReport r = run_benchmark(ds, [](const QAExample& ex) {
        if (ex.question == "throw") throw std::runtime_error("boom");
        SolveOutcome o;
        o.prediction = "x";
        o.failed = ex.question == "fail";
        return o;
    });
    CHECK(r.per_example[0].em == 1);
    CHECK(r.per_example[1].failed);
    CHECK(r.per_example[1].f1 == 0.0);
    CHECK(r.per_example[2].failed);
    CHECK(r.per_example[2].em == 0);
    CHECK(r.em == doctest::Approx(100.0 / 3.0));
}

TEST_CASE("report output") {
    TempDir dir;
    std::vector<QAExample> ds = {{"q/1", "one", {"a"}}};
    RunReport r = run_benchmark(ds, [](const QAExample&) {
        SolveOutcome o;
        o.prediction = "a";
        o.trace = nlohmann::ordered_json{{"question_id", "q/1"}};
        return o;
    });
    r.dataset_name = "hotpotqa";
    r.config = {{"k_triples", 5}};
    write_report(r, dir.path());
    const auto j = json::parse(read_file(dir / "report.json"));
    CHECK(j["em"] == 100.0);
    CHECK(j["config"]["k_triples"] == 5);
    CHECK(std::filesystem::exists(dir / "report.txt"));
    CHECK(std::distance(std::filesystem::directory_iterator(dir / "traces"),
                        std::filesystem::directory_iterator{}) == 1);

    const std::string table = format_report_table(r);
    CHECK(table.find("SubQRAG") != std::string::npos);
    CHECK(table.find("56.00") != std::string::npos);
    CHECK(table.find("64.30") != std::string::npos);
}

TEST_CASE("reference scores") {
    const auto& refs = reference_scores();
    auto find = [&](const std::string& method, const std::string& dataset) {
        for (const auto& r : refs) {
            if (r.method == method && r.dataset == dataset) return r;
        }
        FAIL("missing reference row");
        return ReferenceScore{};
    };
    CHECK(find("SubQRAG (published)", "hotpotqa").em == 56.00);
    CHECK(find("SubQRAG (published)", "hotpotqa").f1 == 64.30);
    CHECK(find("SubQRAG (published)", "musique").em == 29.70);
    CHECK(find("SubQRAG (published)", "2wiki").f1 == 64.30);
    CHECK(find("w/o Decomposition (published)", "hotpotqa").em == 50.5);
    CHECK(find("w/o Rewriting (published)", "hotpotqa").f1 == 50.2);
    CHECK(find("w/o Update (published)", "hotpotqa").em == 54.5);
}
