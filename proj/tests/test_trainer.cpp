#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "tabtag/synth.hpp"
#include "tabtag/trainer.hpp"

using namespace tabtag;

namespace {

RunConfig tiny_run(Phase phase) {
    RunConfig c;
    c.model.d = 24;
    c.model.n_layers = 1;
    c.model.n_heads = 2;
    c.model.mlp_hidden = 48;
    c.model.max_seq_len = 512;
    c.train = TrainConfig::defaults(phase);
    return c;
}

std::vector<Document> corpus(GenKind kind, int n, std::uint64_t seed) {
    GenProfile p;
    p.kind = kind;
    p.seed = seed;
    std::vector<Document> out;
    for (auto& g : generate(p, n)) out.push_back(std::move(g.doc));
    return out;
}

double doc_loss(const ModelParams<float>& p, const RunConfig& cfg, const Tokenizer& tok, const Document& d) {
    EncoderConfig m = cfg.model;
    m.vocab_size = tok.size();
    return loss_and_grad<float>(p, m, encode_input(d, tok, m.max_seq_len), targets_from_document(d), cfg.train.loss,
                                nullptr)
        .total;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
    CHECK(lr_at(0, 100, 1e-4) == 0.0);
    CHECK(lr_at(5, 100, 1e-4) == doctest::Approx(5e-5));
    CHECK(lr_at(10, 100, 1e-4) == doctest::Approx(1e-4));
    CHECK(lr_at(55, 100, 1e-4) == doctest::Approx(5e-5).epsilon(1e-12));
    CHECK(lr_at(100, 100, 1e-4) == doctest::Approx(0.0).scale(1e-4));
    // ceil(0.1 * 95) = 10 warmup steps.
    CHECK(lr_at(10, 95, 1e-4) == doctest::Approx(1e-4));
    double prev = 0;
    for (long s = 0; s <= 1000; ++s) {
        const double lr = lr_at(s, 1000, 1e-3);
        CHECK(lr >= 0.0);
        CHECK(std::abs(lr - prev) <= 1e-3 / 100 + 1e-15);
        prev = lr;
    }
}

TEST_CASE("AdamW matches a hand-computed step") {
    TrainConfig cfg;
    cfg.weight_decay = 0.01;
    std::vector<float> p = {1.0f, -2.0f};
    std::vector<float> m = {0, 0}, v = {0, 0};
    const std::vector<float> g1 = {0.5f, 0.1f};
    const std::vector<float> g2 = {-0.25f, 0.3f};
    const double lr = 0.01;

    std::vector<double> P = {1.0, -2.0}, M = {0, 0}, V = {0, 0};
    for (int t = 1; t <= 2; ++t) {
        const auto& g = t == 1 ? g1 : g2;
        adamw_update(p, g, m, v, t, lr, cfg, true);
        for (size_t i = 0; i < 2; ++i) {
            M[i] = 0.9 * M[i] + 0.1 * g[i];
            V[i] = 0.999 * V[i] + 0.001 * double(g[i]) * g[i];
            const double mhat = M[i] / (1 - std::pow(0.9, t));
            const double vhat = V[i] / (1 - std::pow(0.999, t));
            P[i] = P[i] - lr * 0.01 * P[i] - lr * mhat / (std::sqrt(vhat) + 1e-8);
            CHECK(std::abs(p[i] - P[i]) < 1e-7);
        }
    }
    // First step moves each weight by about lr, against the gradient sign.
    CHECK(std::abs(double(p[0]) - (1.0 - 0.0001 - 0.01 - 0.0001 * 0.9899 - 0.01 * 0.0)) < 0.02);

    std::vector<float> q = {1.0f};
    std::vector<float> mq = {0}, vq = {0};
    const std::vector<float> zero = {0.0f};
    adamw_update(q, zero, mq, vq, 1, 0.5, cfg, false);
    CHECK(q[0] == 1.0f);
    adamw_update(q, zero, mq, vq, 1, 0.5, cfg, true);
    CHECK(q[0] == doctest::Approx(1.0 - 0.5 * 0.01));
}

TEST_CASE("gradient clipping") {
    EncoderConfig c;
    c.d = 24;
    c.n_layers = 1;
    c.n_heads = 2;
    c.mlp_hidden = 48;
    c.vocab_size = 10;
    auto g = init_params<float>(c, 0).zeros_like();
    g.col_b(0, 0) = 3.0f;
    g.row_b(0, 0) = 4.0f;
    CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g.col_b(0, 0) == doctest::Approx(0.6));
    CHECK(g.row_b(0, 0) == doctest::Approx(0.8));
    CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("config parsing") {
    const auto a = parse_config(R"({"train":{"phase":"finetune"}})");
    CHECK(a.train.lr_peak == 5e-5);
    CHECK(a.train.epochs == 10);
    CHECK(a.train.loss.phase == Phase::finetune);
    const auto b = parse_config(R"({"train":{"epochs":3}})", Phase::pretrain);
    CHECK(b.train.lr_peak == 1e-4);
    CHECK(b.train.epochs == 3);
    const auto c = parse_config(R"({"model":{"d":48,"spatial_init":"sinusoidal"},"train":{"aug":{"scale_range":[0.9,1.1]}}})");
    CHECK(c.model.d == 48);
    CHECK(c.model.spatial_init == SpatialInit::sinusoidal);
    CHECK(c.train.aug.scale_min == 0.9);
    CHECK(parse_config(config_to_json(c)).train.aug.scale_max == 1.1);
    CHECK_THROWS_AS(parse_config(R"({"train":{"epocs":3}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({"model":{"d":100}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config(R"({"train":{"batch_size":0}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("[1,2"), std::invalid_argument);
}

TEST_CASE("training reduces the loss of a tiny document") {
    auto docs = corpus(GenKind::pretrain, 1, 4);
    auto cfg = tiny_run(Phase::pretrain);
    cfg.train.epochs = 1;
    cfg.train.augment = false;
    const auto tok = build_vocab(docs, 1);
    cfg.model.vocab_size = tok.size();
    const auto init = init_params<float>(cfg.model, cfg.train.seed);
    const auto r = train(docs, nullptr, cfg, tok);
    REQUIRE(r.log.size() == 1);
    CHECK(doc_loss(r.params, cfg, tok, docs[0]) < doc_loss(init, cfg, tok, docs[0]));
    CHECK(r.optimizer.step == 1);
}

TEST_CASE("50-document corpus at default settings") {
    auto docs = corpus(GenKind::pretrain, 50, 8);
    RunConfig cfg;
    cfg.train = TrainConfig::defaults(Phase::pretrain);
    const auto tok = build_vocab(docs, cfg.train.min_count);
    const auto r = train(docs, nullptr, cfg, tok);
    const size_t per_epoch = (50 + size_t(cfg.train.batch_size) - 1) / size_t(cfg.train.batch_size);
    REQUIRE(r.log.size() == 5 * per_epoch);
    double first = 0, last = 0;
    for (size_t i = 0; i < per_epoch; ++i) {
        first += r.log[i].loss.total / double(per_epoch);
        last += r.log[r.log.size() - 1 - i].loss.total / double(per_epoch);
    }
    MESSAGE("epoch 1 mean loss " << first << ", epoch 5 mean loss " << last);
    CHECK(last < first);
    // Overfit smoke target: at least a 50% drop over 5 epochs.
    CHECK(last <= 0.5 * first);
}

TEST_CASE("same seed gives byte-identical checkpoints") {
    auto docs = corpus(GenKind::pretrain, 6, 2);
    auto cfg = tiny_run(Phase::pretrain);
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    const auto tok = build_vocab(docs, 1);
    cfg.model.vocab_size = tok.size();
    auto a = train(docs, nullptr, cfg, tok);
    auto b = train(docs, nullptr, cfg, tok);
    const auto bytes_a = serialize_checkpoint(Checkpoint{cfg, tok, a.params, a.optimizer});
    const auto bytes_b = serialize_checkpoint(Checkpoint{cfg, tok, b.params, b.optimizer});
    CHECK(bytes_a == bytes_b);
    cfg.train.seed = 1;
    auto c = train(docs, nullptr, cfg, tok);
    CHECK(serialize_checkpoint(Checkpoint{cfg, tok, c.params, c.optimizer}) != bytes_a);
}

TEST_CASE("fine-tuning mix") {
    auto fin = corpus(GenKind::finance, 20, 1);
    auto pre = corpus(GenKind::pretrain, 20, 2);
    auto all = fin;
    all.insert(all.end(), pre.begin(), pre.end());
    const auto tok = build_vocab(all, 1);
    auto cfg = tiny_run(Phase::finetune);
    cfg.train.epochs = 3;
    cfg.train.batch_size = 4;

    SUBCASE("mix_fraction 0 draws nothing from the mix corpus") {
        cfg.train.mix_fraction = 0.0;
        const auto r = train(fin, &pre, cfg, tok);
        long fine = 0;
        for (const auto& s : r.log) {
            for (const auto f : s.mix_flags) {
                CHECK(f == 0);
                ++fine;
            }
        }
        CHECK(fine == 60);
    }
    SUBCASE("default fraction") {
        const auto r = train(fin, &pre, cfg, tok);
        long mixed = 0, fine = 0;
        for (const auto& s : r.log) {
            for (const auto f : s.mix_flags) (f ? mixed : fine) += 1;
        }
        CHECK(fine == 60);
        CHECK(mixed > 0);
        const double share = double(mixed) / double(mixed + fine);
        CHECK(share > 0.15);
        CHECK(share < 0.45);
    }
    SUBCASE("phase/corpus mismatch") {
        CHECK_THROWS_AS(train(pre, nullptr, cfg, tok), TrainError);
    }
    SUBCASE("step log json") {
        const auto r = train(fin, &pre, cfg, tok);
        const auto j = nlohmann::json::parse(step_log_json(r.log[0]));
        CHECK(j["step"] == 1);
        for (const char* k : {"lr", "ce_label", "ce_col", "ce_row", "mse_bbox", "consistency", "total", "mix_flags"}) {
            CHECK(j.contains(k));
        }
    }
}

TEST_CASE("checkpoint format") {
    testutil::TempDir dir("tabtag-ckpt");
    RunConfig cfg;
    Tokenizer tok({"<pad>", "<unk>", "<mask>", "qty", "00"});
    cfg.model.vocab_size = tok.size();
    auto params = init_params<float>(cfg.model, 3);
    Checkpoint ck{cfg, tok, params, OptimizerState::zeros_like(params)};
    ck.optimizer->step = 17;
    ck.optimizer->m.col_b(0, 1) = 0.5f;
    const auto bytes = serialize_checkpoint(ck);
    CHECK(bytes.rfind("SPBERT-CKPT v1\n", 0) == 0);

    SUBCASE("roundtrip is byte-stable") {
        save_checkpoint(ck, dir / "a.ckpt");
        const auto back = load_checkpoint(dir / "a.ckpt");
        CHECK(back.tokenizer == tok);
        CHECK(back.optimizer->step == 17);
        CHECK(back.optimizer->m.col_b(0, 1) == 0.5f);
        CHECK(back.params.tok_emb == params.tok_emb);
        CHECK(serialize_checkpoint(back) == bytes);
    }
    SUBCASE("truncation is detected") {
        CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
        CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, 10)), CheckpointError);
        CHECK_THROWS_AS(parse_checkpoint(""), CheckpointError);
    }
    SUBCASE("bad header or version") {
        auto other = bytes;
        other[0] = 'X';
        CHECK_THROWS_AS(parse_checkpoint(other), CheckpointError);
        other = bytes;
        other.replace(0, 14, "SPBERT-CKPT v2");
        CHECK_THROWS_WITH_AS(parse_checkpoint(other), doctest::Contains("version"), CheckpointError);
    }
    SUBCASE("d=96 checkpoint against a d=192 config") {
        save_checkpoint(ck, dir / "b.ckpt");
        EncoderConfig big = cfg.model;
        big.d = 192;
        big.mlp_hidden = 768;
        CHECK_THROWS_WITH_AS(load_checkpoint(dir / "b.ckpt", big), doctest::Contains("tok_emb"), ShapeError);
        CHECK_NOTHROW(load_checkpoint(dir / "b.ckpt", cfg.model));
    }
}

TEST_CASE("evaluate on gold-consistent predictions") {
    auto fin = corpus(GenKind::finance, 3, 6);
    const auto tok = build_vocab(fin, 1);
    RunConfig cfg = tiny_run(Phase::finetune);
    cfg.model.vocab_size = tok.size();
    const auto p = init_params<float>(cfg.model, 0);
    std::vector<ExtractedTable> truth;
    GenProfile prof;
    prof.seed = 6;
    for (auto& g : generate(prof, 3)) truth.push_back(g.truth);
    const auto r = evaluate(p, cfg.model, tok, fin, truth);
    CHECK(r.documents == 3);
    CHECK(r.teds_mean >= 0.0);
    CHECK(r.teds_mean <= 1.0);
    const auto tags = predict_tags(p, cfg.model, tok, fin[0]);
    CHECK(tags.column.size() == fin[0].size());
}
