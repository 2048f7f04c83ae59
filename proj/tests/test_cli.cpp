#include <sys/wait.h>

#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "tabtag/doc_model.hpp"
#include "tabtag/synth.hpp"

namespace fs = std::filesystem;
using testutil::slurp;
using testutil::spit;

namespace {

struct RunResult {
    int code = -1;
    std::string output;
};

// Runs the CLI with stdout and stderr captured together.
RunResult run(const std::string& args) {
    const std::string cmd = std::string("\"") + TABTAG_CLI_PATH + "\" " + args + " 2>&1";
    RunResult r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

size_t count_lines(const std::string& s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kTinyConfig =
    R"({"model":{"d":24,"n_layers":1,"n_heads":2,"mlp_hidden":48},"train":{"epochs":1,"batch_size":4,"min_count":1}})";

}  // namespace

TEST_CASE("help") {
    const auto r = run("--help");
    CHECK(r.code == 0);
    for (const char* sub : {"gen", "train", "eval", "extract", "bench", "gradcheck"}) CHECK(r.output.find(sub) != std::string::npos);
    const auto t = run("train --help");
    CHECK(t.code == 0);
    for (const char* flag : {"--data", "--mix", "--config", "--phase", "--out"}) CHECK(t.output.find(flag) != std::string::npos);
    CHECK(run("bench --help").output.find("--seq-lens") != std::string::npos);
    CHECK(run("frobnicate").code == 1);
}

TEST_CASE("gen") {
    testutil::TempDir dir("tabtag-cli-gen");
    const auto out = dir / "d.jsonl";
    const auto r = run("gen --profile finance --count 10 --seed 7 --out " + q(out));
    REQUIRE(r.code == 0);
    const auto corpus = slurp(out);
    CHECK(count_lines(corpus) == 10);
    CHECK(count_lines(slurp(dir / "d.gt.jsonl")) == 10);

    REQUIRE(run("gen --profile finance --count 10 --seed 7 --out " + q(dir / "e.jsonl")).code == 0);
    CHECK(slurp(dir / "e.jsonl") == corpus);
    CHECK(slurp(dir / "e.gt.jsonl") == slurp(dir / "d.gt.jsonl"));

    CHECK(run("gen --profile finance --count 0 --out " + q(out)).code == 1);
    CHECK(run("gen --profile bogus --count 3 --out " + q(out)).code == 1);
}

TEST_CASE("train, eval and extract") {
    testutil::TempDir dir("tabtag-cli-train");
    spit(dir / "cfg.json", kTinyConfig);
    REQUIRE(run("gen --profile pretrain --count 6 --seed 1 --out " + q(dir / "pre.jsonl")).code == 0);
    REQUIRE(run("gen --profile finance --count 6 --seed 2 --out " + q(dir / "fin.jsonl")).code == 0);

    SUBCASE("pretrain then finetune with mix") {
        auto r = run("train --data " + q(dir / "pre.jsonl") + " --config " + q(dir / "cfg.json") +
                     " --phase pretrain --out " + q(dir / "pre.ckpt"));
        INFO(r.output);
        REQUIRE(r.code == 0);
        CHECK(fs::exists(dir / "pre.ckpt"));
        std::istringstream log(slurp(dir / "pre.ckpt.log.jsonl"));
        std::string line;
        long step = 0;
        while (std::getline(log, line)) CHECK(nlohmann::json::parse(line)["step"] == ++step);
        CHECK(step == 2);

        r = run("train --data " + q(dir / "fin.jsonl") + " --mix " + q(dir / "pre.jsonl") + " --config " +
                q(dir / "cfg.json") + " --phase finetune --init " + q(dir / "pre.ckpt") + " --out " +
                q(dir / "fin.ckpt") + " --log " + q(dir / "fin.log"));
        INFO(r.output);
        REQUIRE(r.code == 0);
        std::istringstream flog(slurp(dir / "fin.log"));
        long fine = 0;
        while (std::getline(flog, line)) {
            const auto j = nlohmann::json::parse(line);
            for (const auto& f : j["mix_flags"]) fine += f == 0;
        }
        CHECK(fine == 6);

        r = run("eval --data " + q(dir / "fin.jsonl") + " --gt " + q(dir / "fin.gt.jsonl") + " --ckpt " +
                q(dir / "fin.ckpt") + " --report " + q(dir / "report.json"));
        INFO(r.output);
        REQUIRE(r.code == 0);
        const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
        for (const char* k : {"documents", "label", "column", "row", "teds_mean", "fully_correct_rate",
                              "field_accuracy", "value_accuracy", "exact_match", "levenshtein_similarity"}) {
            CHECK(rep.contains(k));
        }
        CHECK(rep["documents"] == 6);

        const auto all = slurp(dir / "fin.jsonl");
        const auto doc = all.substr(0, all.find('\n'));
        spit(dir / "doc.json", doc);
        r = run("extract --doc " + q(dir / "doc.json") + " --ckpt " + q(dir / "fin.ckpt") + " --format json --out " +
                q(dir / "t.json"));
        INFO(r.output);
        REQUIRE(r.code == 0);
        const auto t = nlohmann::json::parse(slurp(dir / "t.json"));
        CHECK(t.contains("header"));
        CHECK(t.contains("rows"));
        CHECK(t.contains("key_values"));

        r = run("extract --doc " + q(dir / "doc.json") + " --ckpt " + q(dir / "fin.ckpt") + " --format csv --out " +
                q(dir / "t.csv"));
        REQUIRE(r.code == 0);
        CHECK(fs::exists(dir / "t.csv"));
        CHECK(nlohmann::json::parse(slurp(dir / "t.kv.json")).is_object());

        // 600 tokens against max_seq_len 512.
        tabtag::Document big;
        big.id = "big";
        for (int i = 0; i < 600; ++i) {
            big.tokens.push_back(testutil::tok("w", (i % 30) * 30, (i / 30) * 40, (i % 30) * 30 + 20, (i / 30) * 40 + 10));
        }
        spit(dir / "big.json", tabtag::serialize_document(big, tabtag::TagSchema{}));
        r = run("extract --doc " + q(dir / "big.json") + " --ckpt " + q(dir / "fin.ckpt") + " --format json --out " +
                q(dir / "big.out"));
        CHECK(r.code == 2);
        CHECK(r.output.find("600") != std::string::npos);
        CHECK(r.output.find("512") != std::string::npos);
    }
    SUBCASE("phase mismatch is a runtime error") {
        const auto r = run("train --data " + q(dir / "pre.jsonl") + " --config " + q(dir / "cfg.json") +
                           " --phase finetune --out " + q(dir / "x.ckpt"));
        CHECK(r.code == 2);
    }
    SUBCASE("missing config is a usage error") {
        const auto r = run("train --data " + q(dir / "pre.jsonl") + " --config " + q(dir / "nope.json") +
                           " --phase pretrain --out " + q(dir / "x.ckpt"));
        CHECK(r.code == 1);
    }
    SUBCASE("oracle evaluation") {
        const auto r = run("eval --oracle --data " + q(dir / "fin.jsonl") + " --gt " + q(dir / "fin.gt.jsonl") +
                           " --report " + q(dir / "oracle.json"));
        INFO(r.output);
        REQUIRE(r.code == 0);
        const auto rep = nlohmann::json::parse(slurp(dir / "oracle.json"));
        CHECK(rep["teds_mean"] == 1.0);
        CHECK(rep["fully_correct_rate"] == 1.0);
        CHECK(rep["column"]["macro_f1"] == 1.0);
        CHECK(rep["row"]["macro_f1"] == 1.0);
        CHECK(rep["label"]["macro_f1"] == 1.0);
    }
    SUBCASE("missing ground truth is a runtime error") {
        const auto r = run("eval --oracle --data " + q(dir / "fin.jsonl") + " --gt " + q(dir / "missing.gt.jsonl") +
                           " --report " + q(dir / "r.json"));
        CHECK(r.code == 2);
    }
}

TEST_CASE("bench") {
    testutil::TempDir dir("tabtag-cli-bench");
    const auto r = run("bench --batch-sizes 1,2 --seq-lens 16,32,64 --reps 2 --warmup 1 --out " + q(dir / "b.json"));
    INFO(r.output);
    REQUIRE(r.code == 0);
    CHECK(r.output.find("Tokens Per Second") != std::string::npos);
    const auto j = nlohmann::json::parse(slurp(dir / "b.json"));
    REQUIRE(j["rows"].size() == 6);
    for (const auto& row : j["rows"]) {
        CHECK(row["tokens_per_second"].get<double>() > 0);
        CHECK(row.contains("tokens_per_second_std"));
    }
    CHECK(run("bench --batch-sizes 0 --seq-lens 16").code == 1);
}

TEST_CASE("gradcheck") {
    testutil::TempDir dir("tabtag-cli-gc");
    spit(dir / "cfg.json", kTinyConfig);
    auto r = run("gradcheck --samples 6");
    INFO(r.output);
    CHECK(r.code == 0);
    CHECK(r.output.find("layers.1.wq") != std::string::npos);
    r = run("gradcheck --config " + q(dir / "cfg.json") + " --tol 1e-9");
    CHECK(r.code != 0);
    CHECK(r.output.find("FAIL") != std::string::npos);
    spit(dir / "bad.json", R"({"model":{"d":100}})");
    CHECK(run("gradcheck --config " + q(dir / "bad.json")).code == 1);
}
