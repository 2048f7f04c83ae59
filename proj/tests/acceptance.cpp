// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "helpers.hpp"
#include "json.hpp"
#include "tabtag/losses.hpp"
#include "tabtag/synth.hpp"
#include "tabtag/trainer.hpp"
#include "ted_oracle.hpp"

using namespace tabtag;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::vector<Document> docs_of(const std::vector<GeneratedDoc>& g) {
    std::vector<Document> out;
    for (const auto& x : g) out.push_back(x.doc);
    return out;
}

std::string fmt(double x, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << x;
    return s.str();
}

Outcome tagging_roundtrip() {
    std::mt19937_64 rng(1000);
    int ok = 0;
    for (int i = 0; i < 1000; ++i) {
        const bool col = i % 2 == 0;
        const auto head = col ? Head::column : Head::row;
        const auto x = testutil::random_tagging_instance(rng, head, col ? kNumColumnTags : 2);
        ok += decode_tags(encode_tags(x.n, x.segments, x.lines), head, x.lines) == x.segments;
    }
    return {ok == 1000, std::to_string(ok) + "/1000 instances roundtrip"};
}

Outcome gradient_correctness() {
    EncoderConfig small;
    small.d = 24;
    small.n_layers = 1;
    small.n_heads = 2;
    small.mlp_hidden = 48;
    small.vocab_size = 50;
    EncoderConfig full;
    full.vocab_size = 50;
    double worst = 0;
    std::string worst_tensor;
    for (const auto& cfg : {small, full}) {
        const auto r = gradcheck(cfg, 7);
        for (const auto& e : r.entries) {
            if (e.max_rel_error >= worst) {
                worst = e.max_rel_error;
                worst_tensor = "d=" + std::to_string(cfg.d) + " " + e.tensor;
            }
        }
    }
    return {worst < 1e-3, "max relative error " + fmt(worst, 3) + " (" + worst_tensor + ")"};
}

Outcome teds_oracle() {
    TableTree gt;
    const int a = gt.add("cellA");
    const int b = gt.add("cellB");
    gt.add("table", {gt.add("row", {a, b})});
    TableTree missing;
    missing.add("table", {missing.add("row", {missing.add("cellA")})});
    TableTree root;
    root.add("table");
    const bool fixtures = teds(gt, gt) == 1.0 && teds(missing, gt) == 0.75 && teds(root, gt) == 0.25;

    std::mt19937_64 rng(200);
    int agree = 0;
    for (int i = 0; i < 200; ++i) {
        const auto x = testutil::random_tree(rng);
        const auto y = testutil::random_tree(rng);
        agree += tree_edit_distance(x, y) == testutil::naive_tree_distance(x, y);
    }
    return {fixtures && agree == 200,
            std::to_string(agree) + "/200 pairs agree, fixtures " + (fixtures ? "ok" : "wrong")};
}

Outcome reconstruction_closure() {
    int ok = 0;
    for (const auto kind : {GenKind::pretrain, GenKind::finance}) {
        GenProfile p;
        p.kind = kind;
        p.seed = 500;
        for (const auto& g : generate(p, 500)) {
            ok += fully_correct(reconstruct(g.doc, gold_tags(g.doc)), g.truth);
        }
    }
    return {ok == 1000, std::to_string(ok) + "/1000 documents fully correct"};
}

Outcome end_to_end() {
    GenProfile pp;
    pp.kind = GenKind::pretrain;
    pp.seed = 101;
    GenProfile fp;
    fp.seed = 202;
    GenProfile hp;
    hp.seed = 303;
    const auto pre = docs_of(generate(pp, 2000));
    const auto fin = docs_of(generate(fp, 2000));
    const auto held = generate(hp, 200);

    auto all = pre;
    all.insert(all.end(), fin.begin(), fin.end());
    const auto tok = build_vocab(all, 2);

    // Settings found by a small sweep at this model size (see README).
    RunConfig cfg;
    cfg.model.spatial_init = SpatialInit::sinusoidal;
    cfg.model.vocab_size = tok.size();
    cfg.train = TrainConfig::defaults(Phase::pretrain);
    cfg.train.lr_peak = 1e-3;
    cfg.train.batch_size = 2;
    cfg.train.augment = false;
    const auto pretrained = train(pre, nullptr, cfg, tok);

    cfg.train = TrainConfig::defaults(Phase::finetune);
    cfg.train.lr_peak = 5e-4;
    cfg.train.batch_size = 2;
    cfg.train.augment = false;
    const auto tuned = train(fin, &pre, cfg, tok, &pretrained.params);

    std::vector<Document> docs;
    std::vector<ExtractedTable> truth;
    for (const auto& h : held) {
        docs.push_back(h.doc);
        truth.push_back(h.truth);
    }
    const auto r = evaluate(tuned.params, cfg.model, tok, docs, truth);
    const bool pass = r.column.macro_f1 >= 0.95 && r.row.macro_f1 >= 0.95 && r.label.macro_f1 >= 0.90 &&
                      r.fully_correct_rate >= 0.80 && r.teds_mean >= 0.95;
    return {pass, "column F1 " + fmt(r.column.macro_f1) + " (>=0.95), row F1 " + fmt(r.row.macro_f1) +
                      " (>=0.95), label F1 " + fmt(r.label.macro_f1) + " (>=0.90), fully correct " +
                      fmt(r.fully_correct_rate) + " (>=0.80), TEDS " + fmt(r.teds_mean) + " (>=0.95)"};
}

Outcome loss_weighting() {
    const double total = combine_loss(1, 1, 1, 1, 1, LossConfig{}).total;

    auto one_hot = [](const std::vector<int>& tags) {
        Mat<double> m = Mat<double>::Zero(static_cast<int>(tags.size()), 31);
        for (size_t i = 0; i < tags.size(); ++i) m(static_cast<int>(i), tags[i]) = 1000.0;
        return m;
    };
    const int b0 = TagVocabulary::make(TagPrefix::B, 0);
    const int i0 = TagVocabulary::make(TagPrefix::I, 0);
    const std::vector<std::uint8_t> mask3 = {1, 1, 1}, mask2 = {1, 1};
    const std::vector<int> gold3 = {b0, i0, TagVocabulary::make(TagPrefix::B, 3)};
    const double homogeneous = consistency_loss(
        one_hot({TagVocabulary::make(TagPrefix::B, 4), TagVocabulary::make(TagPrefix::IB, 4),
                 TagVocabulary::make(TagPrefix::I, 7)}),
        std::span<const int>(gold3), std::span<const std::uint8_t>(mask3));
    const std::vector<int> gold2 = {b0, i0};
    const double spread =
        consistency_loss(one_hot({TagVocabulary::make(TagPrefix::B, 1), TagVocabulary::make(TagPrefix::I, 2)}),
                         std::span<const int>(gold2), std::span<const std::uint8_t>(mask2));
    const bool pass = std::abs(total - 1.2) < 1e-9 && homogeneous == 0.0 && std::abs(spread - 0.25) < 1e-9;
    return {pass, "total " + fmt(total, 12) + ", homogeneous " + fmt(homogeneous, 12) + ", two-token " +
                      fmt(spread, 12)};
}

Outcome determinism() {
    testutil::TempDir dir("tabtag-accept-det");
    bool corpora = true;
    for (const auto kind : {GenKind::pretrain, GenKind::finance}) {
        GenProfile p;
        p.kind = kind;
        p.seed = 77;
        for (const char* name : {"a", "b"}) {
            const auto g = generate(p, 100);
            save_corpus(docs_of(g), dir / (std::string(name) + ".jsonl"));
            save_ground_truth(g, dir / (std::string(name) + ".gt.jsonl"));
        }
        corpora = corpora && testutil::slurp(dir / "a.jsonl") == testutil::slurp(dir / "b.jsonl") &&
                  testutil::slurp(dir / "a.gt.jsonl") == testutil::slurp(dir / "b.gt.jsonl");
    }

    GenProfile p;
    p.seed = 78;
    const auto fin = docs_of(generate(p, 20));
    p.kind = GenKind::pretrain;
    const auto pre = docs_of(generate(p, 20));
    auto all = fin;
    all.insert(all.end(), pre.begin(), pre.end());
    const auto tok = build_vocab(all, 1);
    RunConfig cfg;
    cfg.model.vocab_size = tok.size();
    cfg.train = TrainConfig::defaults(Phase::finetune);
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    std::string bytes[2];
    for (auto& b : bytes) {
        auto r = train(fin, &pre, cfg, tok);
        b = serialize_checkpoint(Checkpoint{cfg, tok, std::move(r.params), std::move(r.optimizer)});
    }
    const bool ckpt = bytes[0] == bytes[1];
    return {corpora && ckpt, std::string("corpora ") + (corpora ? "identical" : "differ") + ", checkpoints " +
                                 (ckpt ? "identical" : "differ") + " (" + std::to_string(bytes[0].size()) + " bytes)"};
}

Outcome bench_harness() {
    testutil::TempDir dir("tabtag-accept-bench");
    const auto out = dir / "bench.json";
    const std::string cmd = std::string("\"") + TABTAG_CLI_PATH + "\" bench --batch-sizes 1,8,64 --seq-lens " +
                            "128,256,512,1024,2048 --out \"" + out.string() + "\"";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {false, "cannot start bench"};
    std::string table;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) table.append(buf, n);
    const int status = pclose(p);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "bench exited abnormally"};
    std::cout << table;
    const auto j = nlohmann::json::parse(testutil::slurp(out));
    bool positive = true;
    for (const auto& row : j["rows"]) positive = positive && row["tokens_per_second"].get<double>() > 0;
    const bool pass = j["rows"].size() == 15 && positive;
    return {pass, std::to_string(j["rows"].size()) + " rows, all tokens/second " + (positive ? "positive" : "not positive")};
}

}  // namespace

int main() {
    const std::vector<std::tuple<int, std::string, std::function<Outcome()>, double>> criteria = {
        {1, "tagging roundtrip", tagging_roundtrip, 10},
        {2, "gradient correctness", gradient_correctness, 300},
        {3, "TEDS oracle equivalence", teds_oracle, 30},
        {4, "reconstruction closure", reconstruction_closure, 60},
        {5, "end-to-end learning", end_to_end, 45 * 60},
        {6, "loss weighting", loss_weighting, 0},
        {7, "determinism", determinism, 0},
        {8, "bench harness", bench_harness, 0},
    };
    int failed = 0;
    for (const auto& [id, name, fn, budget] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (budget > 0 && secs > budget) {
            o.pass = false;
            o.detail += ", over the " + fmt(budget, 6) + " s budget";
        }
        failed += !o.pass;
        std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
