// tabtag: generate corpora, train, evaluate, extract tables, benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tabtag/synth.hpp"
#include "tabtag/trainer.hpp"

using namespace tabtag;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << bytes;
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string profile = "finance";
    int count = 0;
    std::uint64_t seed = 0;
    std::string out;
    int min_columns = 2;
    int max_columns = 10;
    int min_rows = 1;
    int max_rows = 15;
    double multiline_p = 0.2;
};

int run_gen(const GenArgs& a) {
    GenProfile p;
    p.kind = parse_gen_kind(a.profile);
    p.seed = a.seed;
    p.min_columns = a.min_columns;
    p.max_columns = a.max_columns;
    p.min_rows = a.min_rows;
    p.max_rows = a.max_rows;
    p.multiline_cell_p = a.multiline_p;
    p.validate();
    const auto docs = generate(p, a.count);
    std::vector<Document> corpus;
    corpus.reserve(docs.size());
    for (const auto& d : docs) corpus.push_back(d.doc);
    save_corpus(corpus, a.out);
    const auto gt = ground_truth_path(a.out);
    save_ground_truth(docs, gt);
    std::cout << "wrote " << docs.size() << " documents to " << a.out << " and ground truth to " << gt.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string mix;
    std::string config;
    std::string phase;
    std::string out;
    std::string init;
    std::string log;
};

int run_train(const TrainArgs& a) {
    RunConfig cfg = load_config(a.config, parse_phase(a.phase));
    Tokenizer tokenizer;
    std::optional<ModelParams<float>> init;
    if (!a.init.empty()) {
        auto ckpt = load_checkpoint(a.init);
        tokenizer = ckpt.tokenizer;
        cfg.model = ckpt.config.model;
        init = std::move(ckpt.params);
    }
    const TagSchema schema(cfg.model.label_set);
    const auto corpus = load_corpus(a.data, schema);
    std::vector<Document> mix;
    if (!a.mix.empty()) mix = load_corpus(a.mix, schema);
    if (!init) {
        std::vector<Document> all = corpus;
        all.insert(all.end(), mix.begin(), mix.end());
        tokenizer = build_vocab(all, cfg.train.min_count);
    }
    cfg.model.vocab_size = tokenizer.size();

    const std::string log_path = a.log.empty() ? a.out + ".log.jsonl" : a.log;
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot write " + log_path);
    const auto t0 = std::chrono::steady_clock::now();
    auto result = train(corpus, mix.empty() ? nullptr : &mix, cfg, tokenizer, init ? &*init : nullptr,
                        [&](const StepLog& s) { log << step_log_json(s) << '\n'; });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Checkpoint ckpt{cfg, tokenizer, std::move(result.params), std::move(result.optimizer)};
    save_checkpoint(ckpt, a.out);
    const double last = result.log.empty() ? 0.0 : result.log.back().loss.total;
    std::printf("%s: %zu steps in %.1fs, final loss %.4f, checkpoint %s, log %s\n",
                std::string(phase_name(cfg.train.phase)).c_str(), result.log.size(), secs, last, a.out.c_str(),
                log_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string data;
    std::string gt;
    std::string ckpt;
    std::string report;
    bool oracle = false;
};

int run_eval(const EvalArgs& a) {
    if (!a.oracle && a.ckpt.empty()) throw CLI::ValidationError("--ckpt", "required unless --oracle is given");
    std::optional<Checkpoint> ckpt;
    TagSchema schema;
    if (!a.oracle) {
        ckpt = load_checkpoint(a.ckpt);
        schema = TagSchema(ckpt->config.model.label_set);
    }
    const auto docs = load_corpus(a.data, schema);
    std::map<std::string, ExtractedTable> truth;
    for (auto& [id, table] : load_ground_truth(a.gt)) truth.emplace(id, std::move(table));

    const int label_tags = ckpt ? ckpt->config.model.num_label_tags() : schema.label.size();
    MetricsAccumulator acc(label_tags);
    for (const auto& doc : docs) {
        const auto it = truth.find(doc.id);
        if (it == truth.end()) throw std::runtime_error("no ground truth for document '" + doc.id + "'");
        auto gold = gold_tags(doc);
        if (!doc.has_head(Head::label)) gold.label.clear();
        const TagSequences pred =
            a.oracle ? gold_tags(doc) : predict_tags(ckpt->params, ckpt->config.model, ckpt->tokenizer, doc);
        acc.add_tags(pred, gold);
        acc.add_table(reconstruct(doc, pred, schema), it->second);
    }
    const auto report = acc.report();
    write_file(a.report, metrics_to_json(report, schema) + "\n");
    std::printf("documents %d  column F1 %.4f  row F1 %.4f  label F1 %.4f  TEDS %.4f  fully-correct %.4f\n",
                report.documents, report.column.macro_f1, report.row.macro_f1, report.label.macro_f1,
                report.teds_mean, report.fully_correct_rate);
    return 0;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string doc;
    std::string ckpt;
    std::string format = "json";
    std::string out;
};

Document read_single_document(const std::string& path, const TagSchema& schema) {
    const std::string text = read_file(path);
    try {
        return parse_document(text, schema);
    } catch (const std::exception&) {
        const auto docs = load_corpus(path, schema);
        if (docs.size() != 1) {
            throw std::runtime_error(path + " holds " + std::to_string(docs.size()) + " documents, expected one");
        }
        return docs.front();
    }
}

int run_extract(const ExtractArgs& a) {
    const auto ckpt = load_checkpoint(a.ckpt);
    const TagSchema schema(ckpt.config.model.label_set);
    const auto doc = read_single_document(a.doc, schema);
    const auto tags = predict_tags(ckpt.params, ckpt.config.model, ckpt.tokenizer, doc);
    const auto table = reconstruct(doc, tags, schema);
    if (a.format == "csv") {
        write_file(a.out, export_csv(table));
        std::filesystem::path kv(a.out);
        kv.replace_extension(".kv.json");
        write_file(kv.string(), export_kv_json(table) + "\n");
        std::cout << "wrote " << a.out << " and " << kv.string() << "\n";
    } else {
        write_file(a.out, export_json(table) + "\n");
        std::cout << "wrote " << a.out << "\n";
    }
    if (!table.ignored_tokens.empty()) {
        std::cerr << table.ignored_tokens.size() << " tagged tokens could not be placed in the table\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
    std::string ckpt;
    std::vector<int> batch_sizes = {1, 8, 64};
    std::vector<int> seq_lens = {128, 256, 512, 1024, 2048};
    std::string out;
    int reps = 5;
    int warmup = 2;
    std::uint64_t seed = 0;
};

struct BenchRow {
    int batch;
    int seq;
    double mean_tps;
    double std_tps;
    double mean_secs;
};

int run_bench(const BenchArgs& a) {
    EncoderConfig cfg;
    ModelParams<float> params;
    if (!a.ckpt.empty()) {
        auto ckpt = load_checkpoint(a.ckpt);
        cfg = ckpt.config.model;
        params = std::move(ckpt.params);
    } else {
        cfg.vocab_size = 1000;
        params = init_params<float>(cfg, a.seed);
    }
    // Sequences longer than the trained position table reuse it cyclically.
    const int longest = *std::max_element(a.seq_lens.begin(), a.seq_lens.end());
    if (longest > cfg.max_seq_len) {
        Mat<float> tiled(longest, cfg.d);
        for (int i = 0; i < longest; ++i) tiled.row(i) = params.pos_emb.row(i % cfg.max_seq_len);
        params.pos_emb = std::move(tiled);
        cfg.max_seq_len = longest;
    }

    std::mt19937_64 rng(a.seed);
    std::vector<BenchRow> rows;
    for (const int seq : a.seq_lens) {
        for (const int batch : a.batch_sizes) {
            std::vector<EncodedInput> inputs(static_cast<size_t>(batch));
            std::uniform_int_distribution<int> id(3, cfg.vocab_size - 1);
            std::uniform_int_distribution<int> coord(0, 980);
            for (auto& in : inputs) {
                for (int t = 0; t < seq; ++t) {
                    const int x = coord(rng);
                    const int y = coord(rng);
                    in.ids.push_back(id(rng));
                    in.boxes.push_back(BBox{x, y, x + 20, y + 12});
                }
                in.valid_len = seq;
            }
            std::vector<double> secs;
            for (int r = 0; r < a.warmup + a.reps; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                for (const auto& in : inputs) {
                    auto res = forward(params, cfg, in);
                    if (!std::isfinite(res.out.column(0, 0))) throw NumericError("non-finite output in bench");
                }
                const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (r >= a.warmup) secs.push_back(s);
            }
            const double tokens = double(batch) * double(seq);
            double mean = 0;
            double mean_s = 0;
            for (const double s : secs) {
                mean += tokens / s;
                mean_s += s;
            }
            mean /= double(secs.size());
            mean_s /= double(secs.size());
            double var = 0;
            for (const double s : secs) var += (tokens / s - mean) * (tokens / s - mean);
            var /= double(secs.size());
            rows.push_back(BenchRow{batch, seq, mean, std::sqrt(var), mean_s});
        }
    }

    std::printf("%10s  %15s  %17s  %12s\n", "Batch Size", "Sequence Length", "Tokens Per Second", "Std Dev");
    for (const auto& r : rows) {
        std::printf("%10d  %15d  %17.0f  %12.0f\n", r.batch, r.seq, r.mean_tps, r.std_tps);
    }
    if (!a.out.empty()) {
        nlohmann::ordered_json j;
        j["repetitions"] = a.reps;
        j["warmup"] = a.warmup;
        j["d"] = cfg.d;
        j["n_layers"] = cfg.n_layers;
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : rows) {
            nlohmann::ordered_json jr;
            jr["batch_size"] = r.batch;
            jr["seq_len"] = r.seq;
            jr["tokens_per_second"] = r.mean_tps;
            jr["tokens_per_second_std"] = r.std_tps;
            jr["mean_seconds"] = r.mean_secs;
            arr.push_back(std::move(jr));
        }
        j["rows"] = std::move(arr);
        write_file(a.out, j.dump(2) + "\n");
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
    std::string config;
    std::uint64_t seed = 0;
    double tol = 1e-3;
    int samples = 24;
};

int run_gradcheck(const GradcheckArgs& a) {
    EncoderConfig cfg;
    if (!a.config.empty()) cfg = load_config(a.config).model;
    GradcheckOptions opts;
    opts.samples_per_tensor = a.samples;
    const auto report = gradcheck(cfg, a.seed, opts);
    std::printf("%-28s %8s %14s\n", "tensor", "checked", "max rel err");
    for (const auto& e : report.entries) {
        std::printf("%-28s %8d %14.3e%s\n", e.tensor.c_str(), e.entries_checked, e.max_rel_error,
                    e.max_rel_error < a.tol ? "" : "  FAIL");
    }
    const bool ok = report.passed(a.tol);
    std::printf("max relative error %.3e, tolerance %.1e: %s\n", report.max_rel_error(), a.tol, ok ? "PASS" : "FAIL");
    return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Token-classification table and key-value extraction"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic corpus and its ground truth");
    gen_cmd->add_option("--profile", gen.profile, "pretrain (structure only) or finance (labeled)")
        ->check(CLI::IsMember({"pretrain", "finance"}))
        ->capture_default_str();
    gen_cmd->add_option("--count", gen.count, "Number of documents")->required()->check(CLI::Range(1, std::numeric_limits<int>::max()));
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output corpus (.jsonl); ground truth goes to <name>.gt.jsonl")->required();
    gen_cmd->add_option("--min-columns", gen.min_columns, "Fewest table columns")->capture_default_str();
    gen_cmd->add_option("--max-columns", gen.max_columns, "Most table columns")->capture_default_str();
    gen_cmd->add_option("--min-rows", gen.min_rows, "Fewest item rows")->capture_default_str();
    gen_cmd->add_option("--max-rows", gen.max_rows, "Most item rows")->capture_default_str();
    gen_cmd->add_option("--multiline-p", gen.multiline_p, "Probability of a multi-line cell")->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train or fine-tune a model");
    train_cmd->add_option("--data", tr.data, "Training corpus (.jsonl)")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--mix", tr.mix, "Structure-only corpus mixed into fine-tuning")->check(CLI::ExistingFile);
    train_cmd->add_option("--config", tr.config, "JSON config file")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--phase", tr.phase, "pretrain or finetune")
        ->required()
        ->check(CLI::IsMember({"pretrain", "finetune"}));
    train_cmd->add_option("--out", tr.out, "Output checkpoint")->required();
    train_cmd->add_option("--init", tr.init, "Checkpoint to start from (keeps its tokenizer)")->check(CLI::ExistingFile);
    train_cmd->add_option("--log", tr.log, "Per-step JSONL log (default <out>.log.jsonl)");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint against ground truth");
    eval_cmd->add_option("--data", ev.data, "Evaluation corpus (.jsonl)")->required();
    eval_cmd->add_option("--gt", ev.gt, "Ground-truth tables (.gt.jsonl)")->required();
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint");
    eval_cmd->add_option("--report", ev.report, "Output metrics report (JSON)")->required();
    eval_cmd->add_flag("--oracle", ev.oracle, "Use the gold tags as predictions");

    ExtractArgs ex;
    auto* extract_cmd = app.add_subcommand("extract", "Extract the table of one document");
    extract_cmd->add_option("--doc", ex.doc, "Document (JSON)")->required();
    extract_cmd->add_option("--ckpt", ex.ckpt, "Checkpoint")->required();
    extract_cmd->add_option("--format", ex.format, "json or csv (csv also writes <out>.kv.json)")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    extract_cmd->add_option("--out", ex.out, "Output file")->required();

    BenchArgs be;
    auto* bench_cmd = app.add_subcommand("bench", "Forward-pass throughput over batch sizes and sequence lengths");
    bench_cmd->add_option("--ckpt", be.ckpt, "Checkpoint (default: freshly initialized model)");
    bench_cmd->add_option("--batch-sizes", be.batch_sizes, "Comma-separated batch sizes")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_option("--seq-lens", be.seq_lens, "Comma-separated sequence lengths")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench_cmd->add_option("--out", be.out, "JSON results file");
    bench_cmd->add_option("--reps", be.reps, "Timed repetitions")->check(CLI::PositiveNumber)->capture_default_str();
    bench_cmd->add_option("--warmup", be.warmup, "Untimed warmup repetitions")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    bench_cmd->add_option("--seed", be.seed, "Random seed for synthetic inputs")->capture_default_str();

    GradcheckArgs gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gc_cmd->add_option("--config", gc.config, "JSON config file (model section is used)")->check(CLI::ExistingFile);
    gc_cmd->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
    gc_cmd->add_option("--tol", gc.tol, "Maximum relative error")->capture_default_str();
    gc_cmd->add_option("--samples", gc.samples, "Entries checked per tensor")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen_cmd) return run_gen(gen);
        if (*train_cmd) return run_train(tr);
        if (*eval_cmd) return run_eval(ev);
        if (*extract_cmd) return run_extract(ex);
        if (*bench_cmd) return run_bench(be);
        if (*gc_cmd) return run_gradcheck(gc);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
