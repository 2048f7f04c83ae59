#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "tabtag/metrics.hpp"
#include "tabtag/synth.hpp"

using namespace tabtag;
using testutil::tok;

namespace {

GenProfile profile(GenKind kind, std::uint64_t seed) {
    GenProfile p;
    p.kind = kind;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("generation is deterministic") {
    const auto p = profile(GenKind::finance, 7);
    const auto a = generate(p, 2);
    const auto b = generate(p, 2);
    REQUIRE(a.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(a[i].doc == b[i].doc);
        CHECK(a[i].truth == b[i].truth);
        CHECK(generate_one(p, i).doc == a[i].doc);
    }
    CHECK_FALSE(a[0].doc == a[1].doc);
    CHECK_FALSE(generate(profile(GenKind::finance, 8), 1)[0].doc == a[0].doc);
    CHECK_THROWS_AS(generate(p, 0), std::invalid_argument);
}

TEST_CASE("gold tags reconstruct the ground truth") {
    for (const auto kind : {GenKind::pretrain, GenKind::finance}) {
        for (const int max_cols : {10, 12}) {
            auto p = profile(kind, 21);
            p.max_columns = max_cols;
            for (const auto& g : generate(p, 150)) {
                INFO(g.doc.id);
                const auto t = reconstruct(g.doc, gold_tags(g.doc));
                CHECK(t == g.truth);
                CHECK(fully_correct(t, g.truth));
                CHECK(t.ignored_tokens.empty());
            }
        }
    }
}

TEST_CASE("documents are valid corpus entries") {
    const auto docs = generate(profile(GenKind::finance, 3), 40);
    for (const auto& g : docs) {
        CHECK(g.doc.has_head(Head::label));
        CHECK(g.doc.has_head(Head::column));
        CHECK(g.doc.has_head(Head::row));
        CHECK(g.doc.size() <= 512);
        for (const auto& t : g.doc.tokens) CHECK(t.bbox.valid());
        // Reading order: line ids never decrease.
        const auto lines = assign_lines(g.doc);
        CHECK(std::is_sorted(lines.line_of.begin(), lines.line_of.end()));
        CHECK_FALSE(g.truth.key_values.empty());
        CHECK_FALSE(g.truth.header.empty());
    }
}

TEST_CASE("pretrain profile has structure tags only") {
    for (const auto& g : generate(profile(GenKind::pretrain, 5), 30)) {
        CHECK_FALSE(g.doc.has_head(Head::label));
        CHECK(g.doc.has_head(Head::column));
        CHECK(g.doc.has_head(Head::row));
        CHECK(g.truth.key_values.empty());
        for (const auto& h : g.truth.header) CHECK_FALSE(h.label);
    }
}

TEST_CASE("profile covers every column count and exercises IB") {
    std::set<int> counts;
    bool ib_col = false, ib_row = false, ib_label = false;
    for (const auto& g : generate(profile(GenKind::finance, 9), 300)) {
        counts.insert(g.truth.num_columns());
        for (const auto& t : g.doc.tokens) {
            ib_col |= TagVocabulary::prefix(*t.col_tag) == TagPrefix::IB;
            ib_row |= TagVocabulary::prefix(*t.row_tag) == TagPrefix::IB;
            ib_label |= TagVocabulary::prefix(*t.label_tag) == TagPrefix::IB;
        }
    }
    CHECK(counts == std::set<int>{2, 3, 4, 5, 6, 7, 8, 9, 10});
    CHECK(ib_col);
    CHECK(ib_row);
    CHECK(ib_label);
}

TEST_CASE("grid_to_tags") {
    SUBCASE("1x1 grid") {
        Document d;
        d.tokens = {tok("x", 10, 10, 20, 20)};
        ExtractedTable grid;
        grid.rows = {{{0, "x", {0}}}};
        const auto out = grid_to_tags(d, grid, false);
        CHECK(out.tokens[0].row_tag == TagVocabulary::make(TagPrefix::B, 0));
        CHECK(out.tokens[0].col_tag == TagVocabulary::make(TagPrefix::B, 0));
        CHECK_FALSE(out.tokens[0].label_tag);
    }
    SUBCASE("12-column row wraps") {
        Document d;
        ExtractedTable grid;
        grid.rows.emplace_back();
        for (int j = 0; j < 12; ++j) {
            d.tokens.push_back(tok("c", 10 + 80 * j, 10, 60 + 80 * j, 20));
            grid.rows[0].push_back(Cell{j, "c", {j}});
        }
        const auto out = grid_to_tags(d, grid, false);
        CHECK(column_tag_index(*out.tokens[10].col_tag) == 0);
        CHECK(column_tag_index(*out.tokens[11].col_tag) == 1);
        CHECK(column_tag_index(*out.tokens[9].col_tag) == 9);
        CHECK(reconstruct(out, gold_tags(out)) == grid);
    }
    SUBCASE("multi-line cell") {
        Document d;
        d.tokens = {tok("Blue", 10, 10, 50, 20), tok("Pen", 10, 24, 40, 34)};
        ExtractedTable grid;
        grid.rows = {{{0, "Blue Pen", {0, 1}}}};
        const auto out = grid_to_tags(d, grid, false);
        CHECK(out.tokens[1].col_tag == TagVocabulary::make(TagPrefix::IB, 0));
        CHECK(out.tokens[1].row_tag == TagVocabulary::make(TagPrefix::IB, 0));
    }
    SUBCASE("a token in two cells is rejected") {
        Document d;
        d.tokens = {tok("x", 10, 10, 20, 20)};
        ExtractedTable grid;
        grid.rows = {{{0, "x", {0}}, {1, "x", {0}}}};
        CHECK_THROWS_AS(grid_to_tags(d, grid, false), GenerationError);
    }
}

TEST_CASE("wide tables and infeasible layouts") {
    auto p = profile(GenKind::finance, 4);
    p.min_columns = 12;
    p.max_columns = 12;
    const auto g = generate_one(p, 0);
    CHECK(g.truth.num_columns() == 12);
    CHECK(reconstruct(g.doc, gold_tags(g.doc)) == g.truth);

    p.min_columns = 40;
    p.max_columns = 40;
    CHECK_THROWS_AS(generate_one(p, 0), GenerationError);

    GenProfile bad;
    bad.min_columns = 5;
    bad.max_columns = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("ground truth file roundtrip") {
    testutil::TempDir dir("tabtag-synth");
    const auto docs = generate(profile(GenKind::finance, 2), 5);
    CHECK(ground_truth_path("data/x.jsonl") == std::filesystem::path("data/x.gt.jsonl"));
    save_ground_truth(docs, dir / "g.gt.jsonl");
    const auto back = load_ground_truth(dir / "g.gt.jsonl");
    REQUIRE(back.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(back[i].first == docs[i].doc.id);
        CHECK(export_json(back[i].second) == export_json(docs[i].truth));
    }
    CHECK_THROWS(load_ground_truth(dir / "missing.gt.jsonl"));
}
