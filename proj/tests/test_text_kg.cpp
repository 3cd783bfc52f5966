#include <doctest.h>

#include <random>
#include <set>

#include "subqrag/errors.hpp"
#include "subqrag/kg_store.hpp"
#include "subqrag/text.hpp"
#include "support/fixtures.hpp"

using namespace subqrag;
using subqrag::testing::TempDir;
using subqrag::testing::read_file;
using subqrag::testing::write_file;

TEST_CASE("text helpers") {
    CHECK(text::trim("  a b \n") == "a b");
    CHECK(text::collapse_whitespace("  a \t\n b  c ") == "a b c");
    CHECK(text::casefold("Barack OBAMA") == "barack obama");
    CHECK(text::casefold("STRASSE Straße") == "strasse strasse");
    CHECK(text::casefold("ÉCOLE Ÿ") == "école ÿ");
    CHECK(text::casefold("ΑΘΗΝΑ") == "αθηνα");
    CHECK(text::casefold("МОСКВА") == "москва");
    // Invalid UTF-8 passes through untouched.
    CHECK(text::casefold(std::string("A\xff")) == std::string("a\xff"));
    CHECK(text::split_whitespace(" x  y ") == std::vector<std::string>{"x", "y"});
}

TEST_CASE("insert_triple assigns ids and deduplicates") {
    KnowledgeGraph g;
    auto r = g.insert_triple("Barack Obama", "born in", "Honolulu", "doc:1", 0);
    CHECK(r.id == 0);
    CHECK(r.inserted);
    CHECK(g.size() == 1);

    r = g.insert_triple("Barack Obama", "born in", "Honolulu", "doc:2", 0);
    CHECK(r.id == 0);
    CHECK_FALSE(r.inserted);
    CHECK(g.size() == 1);

    r = g.insert_triple("barack  OBAMA", "Born In", "honolulu", "doc:3", 0);
    CHECK(r.id == 0);
    CHECK_FALSE(r.inserted);
    CHECK(g.size() == 1);
    // First-seen surface form and provenance are kept.
    CHECK(g.lookup(0).head == "Barack Obama");
    CHECK(g.lookup(0).provenance == "doc:1");
}

TEST_CASE("insert_triple rejects empty fields") {
    KnowledgeGraph g;
    CHECK_THROWS_AS(g.insert_triple("A", "r", "   ", "doc:1", 0), EmptyField);
    CHECK_THROWS_AS(g.insert_triple("", "r", "B", "doc:1", 0), EmptyField);
    CHECK(g.empty());
}

TEST_CASE("lookup") {
    KnowledgeGraph g;
    CHECK_THROWS_AS(g.lookup(0), UnknownId);
    g.insert_triple("A", "r", "B", "doc:1", 0);
    g.insert_triple("B", "r", "C", "doc:1", 0);
    g.insert_triple("C", "r", "D", "doc:1", 0);
    CHECK(g.lookup(2).head == "C");
    CHECK(g.lookup(2).tail == "D");
    CHECK_THROWS_AS(g.lookup(3), UnknownId);
    CHECK_THROWS_AS(g.lookup(-1), UnknownId);
}

TEST_CASE("stats counts triples, entities and dynamic triples") {
    KnowledgeGraph g;
    CHECK(g.stats() == GraphStats{0, 0, 0});
    g.insert_triple("A", "r", "B", "doc:1", 0);
    CHECK(g.stats() == GraphStats{1, 2, 0});
    g.insert_triple("B", "r2", "C", "dynamic:q1", 2);
    CHECK(g.stats() == GraphStats{2, 3, 1});
    // Entities are keyed case-insensitively.
    g.insert_triple("a", "r3", "c", "doc:2", 0);
    CHECK(g.stats().entity_count == 3);
}

TEST_CASE("snapshot round trip") {
    TempDir dir;
    KnowledgeGraph g;
    g.insert_triple("Inception", "directed by", "Christopher Nolan", "doc:d1", 0);
    g.insert_triple("Christopher Nolan", "spouse", "Emma Thomas \"ET\"", "dynamic:q7", 2);
    snapshot_save(g, dir / "a.jsonl");

    const std::string first = read_file(dir / "a.jsonl");
    CHECK(std::count(first.begin(), first.end(), '\n') == 2);

    KnowledgeGraph loaded = snapshot_load(dir / "a.jsonl");
    CHECK(loaded == g);
    CHECK(loaded.stats() == g.stats());
    snapshot_save(loaded, dir / "b.jsonl");
    CHECK(read_file(dir / "b.jsonl") == first);

    // Dedup index survives the reload.
    CHECK_FALSE(loaded.insert_triple("inception", "Directed  by", "christopher nolan", "doc:x", 0).inserted);
}

TEST_CASE("snapshot of an empty graph") {
    TempDir dir;
    snapshot_save(KnowledgeGraph{}, dir / "empty.jsonl");
    CHECK(read_file(dir / "empty.jsonl").empty());
    CHECK(snapshot_load(dir / "empty.jsonl").empty());
}

TEST_CASE("snapshot_load reports the failing line") {
    TempDir dir;
    KnowledgeGraph g;
    g.insert_triple("A", "r", "B", "doc:1", 0);
    g.insert_triple("B", "r", "C", "doc:1", 0);
    std::string body = triple_to_json_line(g.lookup(0)) + "\n" + triple_to_json_line(g.lookup(1)) + "\n";

    write_file(dir / "bad.jsonl", body + "{\"id\":2,\"head\":\"C\"\n");
    try {
        snapshot_load(dir / "bad.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    write_file(dir / "missing.jsonl", body + R"({"id":2,"head":"C","relation":"r","provenance":"doc:1","step":0})" "\n");
    try {
        snapshot_load(dir / "missing.jsonl");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }

    write_file(dir / "dup.jsonl",
               body + R"({"id":2,"head":"a","relation":"R","tail":"b","provenance":"doc:9","step":0})" "\n");
    CHECK_THROWS_AS(snapshot_load(dir / "dup.jsonl"), DuplicateKeyError);

    CHECK_THROWS_AS(snapshot_load(dir / "nope.jsonl"), IoError);
}

TEST_CASE("dedup property: graph size equals distinct keys") {
    std::mt19937 rng(7);
    const std::vector<std::string> ents = {"Paris", "France", "Emma Thomas", "Christopher Nolan"};
    const std::vector<std::string> rels = {"capital of", "spouse", "born in"};
    auto vary = [&](std::string s) {
        for (auto& c : s) {
            if (rng() % 2) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
        if (rng() % 3 == 0) s = "  " + s;
        const auto sp = s.find(' ', 2);
        if (sp != std::string::npos && rng() % 2) s.insert(sp, "  ");
        return s;
    };
    auto oracle = [](const std::string& s) {
        std::string out;
        bool space = false;
        for (char c : s) {
            if (c == ' ') {
                space = !out.empty();
                continue;
            }
            if (space) out.push_back(' ');
            space = false;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        return out;
    };
    KnowledgeGraph g;
    std::set<std::array<std::string, 3>> keys;
    for (int i = 0; i < 500; ++i) {
        const auto h = vary(ents[rng() % ents.size()]);
        const auto r = vary(rels[rng() % rels.size()]);
        const auto t = vary(ents[rng() % ents.size()]);
        keys.insert({oracle(h), oracle(r), oracle(t)});
        g.insert_triple(h, r, t, "doc:x", 0);
    }
    CHECK(g.size() == keys.size());
}
