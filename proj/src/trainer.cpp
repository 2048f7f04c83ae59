#include "tabtag/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace tabtag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration

TrainConfig TrainConfig::defaults(Phase phase) {
    TrainConfig c;
    c.phase = phase;
    c.loss.phase = phase;
    if (phase == Phase::finetune) {
        c.lr_peak = 5e-5;
        c.epochs = 10;
    }
    return c;
}

void TrainConfig::validate() const {
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0)) throw std::invalid_argument("warmup_fraction must be in (0, 1)");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(lr_peak >= 0.0)) throw std::invalid_argument("lr_peak must be >= 0");
    if (!(mix_fraction >= 0.0 && mix_fraction < 1.0)) throw std::invalid_argument("mix_fraction must be in [0, 1)");
    if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be > 0");
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    aug.validate();
}

namespace {

ojson model_json(const EncoderConfig& c) {
    ojson j;
    j["d"] = c.d;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["mlp_hidden"] = c.mlp_hidden;
    j["max_seq_len"] = c.max_seq_len;
    j["vocab_size"] = c.vocab_size;
    j["dropout_rate"] = c.dropout_rate;
    j["spatial_init"] = std::string(spatial_init_name(c.spatial_init));
    j["label_set"] = c.label_set;
    return j;
}

ojson train_json(const TrainConfig& c) {
    ojson j;
    j["phase"] = std::string(phase_name(c.phase));
    j["lr_peak"] = c.lr_peak;
    j["warmup_fraction"] = c.warmup_fraction;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["augment"] = c.augment;
    j["mix_fraction"] = c.mix_fraction;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["weight_decay"] = c.weight_decay;
    j["clip_norm"] = c.clip_norm;
    j["min_count"] = c.min_count;
    ojson a;
    a["spatial_sigma"] = c.aug.spatial_sigma;
    a["mask_rate_max"] = c.aug.mask_rate_max;
    a["token_dropout_p"] = c.aug.token_dropout_p;
    a["numeric_substitution"] = c.aug.numeric_substitution;
    a["column_reorder"] = c.aug.column_reorder;
    a["scale_range"] = {c.aug.scale_min, c.aug.scale_max};
    a["seed"] = c.aug.seed;
    j["aug"] = std::move(a);
    ojson l;
    l["w_label"] = c.loss.w_label;
    l["w_col"] = c.loss.w_col;
    l["w_row"] = c.loss.w_row;
    l["lambda_bbox"] = c.loss.lambda_bbox;
    l["lambda_consistency"] = c.loss.lambda_consistency;
    j["loss"] = std::move(l);
    return j;
}

[[noreturn]] void unknown_field(const std::string& section, const std::string& key) {
    throw std::invalid_argument("unknown field '" + key + "' in config section '" + section + "'");
}

void read_model(const json& j, EncoderConfig& c) {
    for (const auto& [k, v] : j.items()) {
        if (k == "d") c.d = v.get<int>();
        else if (k == "n_layers") c.n_layers = v.get<int>();
        else if (k == "n_heads") c.n_heads = v.get<int>();
        else if (k == "mlp_hidden") c.mlp_hidden = v.get<int>();
        else if (k == "max_seq_len") c.max_seq_len = v.get<int>();
        else if (k == "vocab_size") c.vocab_size = v.get<int>();
        else if (k == "dropout_rate") c.dropout_rate = v.get<double>();
        else if (k == "spatial_init") c.spatial_init = parse_spatial_init(v.get<std::string>());
        else if (k == "label_set") c.label_set = v.get<std::vector<std::string>>();
        else unknown_field("model", k);
    }
}

void read_aug(const json& j, AugConfig& c) {
    for (const auto& [k, v] : j.items()) {
        if (k == "spatial_sigma") c.spatial_sigma = v.get<double>();
        else if (k == "mask_rate_max") c.mask_rate_max = v.get<double>();
        else if (k == "token_dropout_p") c.token_dropout_p = v.get<double>();
        else if (k == "numeric_substitution") c.numeric_substitution = v.get<bool>();
        else if (k == "column_reorder") c.column_reorder = v.get<bool>();
        else if (k == "scale_range") {
            const auto r = v.get<std::vector<double>>();
            if (r.size() != 2) throw std::invalid_argument("scale_range must have two entries");
            c.scale_min = r[0];
            c.scale_max = r[1];
        } else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else unknown_field("aug", k);
    }
}

void read_loss(const json& j, LossConfig& c) {
    for (const auto& [k, v] : j.items()) {
        if (k == "w_label") c.w_label = v.get<double>();
        else if (k == "w_col") c.w_col = v.get<double>();
        else if (k == "w_row") c.w_row = v.get<double>();
        else if (k == "lambda_bbox") c.lambda_bbox = v.get<double>();
        else if (k == "lambda_consistency") c.lambda_consistency = v.get<double>();
        else unknown_field("loss", k);
    }
}

void read_train(const json& j, TrainConfig& c) {
    for (const auto& [k, v] : j.items()) {
        if (k == "phase") c.phase = parse_phase(v.get<std::string>());
        else if (k == "lr_peak") c.lr_peak = v.get<double>();
        else if (k == "warmup_fraction") c.warmup_fraction = v.get<double>();
        else if (k == "epochs") c.epochs = v.get<int>();
        else if (k == "batch_size") c.batch_size = v.get<int>();
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else if (k == "augment") c.augment = v.get<bool>();
        else if (k == "mix_fraction") c.mix_fraction = v.get<double>();
        else if (k == "beta1") c.beta1 = v.get<double>();
        else if (k == "beta2") c.beta2 = v.get<double>();
        else if (k == "eps") c.eps = v.get<double>();
        else if (k == "weight_decay") c.weight_decay = v.get<double>();
        else if (k == "clip_norm") c.clip_norm = v.get<double>();
        else if (k == "min_count") c.min_count = v.get<int>();
        else if (k == "aug") read_aug(v, c.aug);
        else if (k == "loss") read_loss(v, c.loss);
        else unknown_field("train", k);
    }
    c.loss.phase = c.phase;
}

}  // namespace

RunConfig parse_config(const std::string& json_text, std::optional<Phase> phase) {
    RunConfig cfg;
    try {
        const auto j = json::parse(json_text);
        if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
        for (const auto& [k, v] : j.items()) {
            if (k != "model" && k != "train") unknown_field("top level", k);
        }
        // Phase first, so unspecified fields take that phase's defaults.
        if (!phase && j.contains("train") && j["train"].contains("phase")) {
            phase = parse_phase(j["train"]["phase"].get<std::string>());
        }
        if (phase) cfg.train = TrainConfig::defaults(*phase);
        if (j.contains("model")) read_model(j["model"], cfg.model);
        if (j.contains("train")) read_train(j["train"], cfg.train);
        if (phase) {
            cfg.train.phase = *phase;
            cfg.train.loss.phase = *phase;
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("invalid config: ") + e.what());
    }
    cfg.train.validate();
    if (cfg.model.vocab_size == 0) {
        // Filled in from the tokenizer at training time.
        EncoderConfig probe = cfg.model;
        probe.vocab_size = 3;
        probe.validate();
    } else {
        cfg.model.validate();
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<Phase> phase) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), phase);
}

std::string config_to_json(const RunConfig& cfg) {
    ojson j;
    j["model"] = model_json(cfg.model);
    j["train"] = train_json(cfg.train);
    return j.dump();
}

// ---------------------------------------------------------------------------
// Optimizer

double lr_at(long step, long total_steps, double lr_peak, double warmup_fraction) {
    if (total_steps <= 0) return 0.0;
    step = std::clamp(step, 0L, total_steps);
    const long warmup = static_cast<long>(std::ceil(warmup_fraction * double(total_steps)));
    if (step < warmup) return lr_peak * double(step) / double(warmup);
    if (total_steps == warmup) return lr_peak;
    const double progress = double(step - warmup) / double(total_steps - warmup);
    return lr_peak * 0.5 * (1.0 + std::cos(M_PI * progress));
}

OptimizerState OptimizerState::zeros_like(const ModelParams<float>& params) {
    return OptimizerState{params.zeros_like(), params.zeros_like(), 0};
}

void adamw_update(std::span<float> param, std::span<const float> grad, std::span<float> m, std::span<float> v, long t,
                  double lr, const TrainConfig& cfg, bool decays) {
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    const double decay = decays ? lr * cfg.weight_decay : 0.0;
    for (size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double p = param[i];
        param[i] = static_cast<float>(p - decay * p - lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
}

namespace {

struct TensorRef {
    Mat<float>* mat;
    bool decays;
};

std::vector<TensorRef> tensor_refs(ModelParams<float>& p) {
    std::vector<TensorRef> out;
    p.for_each([&](const std::string&, Mat<float>& m, bool decays) { out.push_back({&m, decays}); });
    return out;
}

std::span<float> flat(Mat<float>& m) { return {m.data(), static_cast<size_t>(m.size())}; }

}  // namespace

double clip_grad_norm(ModelParams<float>& grads, double max_norm) {
    double sq = 0;
    for (auto& r : tensor_refs(grads)) sq += r.mat->template cast<double>().squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const auto s = static_cast<float>(max_norm / norm);
        for (auto& r : tensor_refs(grads)) *r.mat *= s;
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Training loop

std::string step_log_json(const StepLog& log) {
    ojson j;
    j["step"] = log.step;
    j["lr"] = log.lr;
    j["ce_label"] = log.loss.ce_label;
    j["ce_col"] = log.loss.ce_col;
    j["ce_row"] = log.loss.ce_row;
    j["mse_bbox"] = log.loss.mse_bbox;
    j["consistency"] = log.loss.consistency;
    j["total"] = log.loss.total;
    j["grad_norm"] = log.grad_norm;
    j["mix_flags"] = log.mix_flags;
    return j.dump();
}

namespace {

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Slot {
    bool mixed;
    int index;
};

void check_corpus(const std::vector<Document>& docs, bool need_label, const char* what) {
    for (const auto& d : docs) {
        if (!d.has_head(Head::column) || !d.has_head(Head::row)) {
            throw TrainError(std::string(what) + " document '" + d.id + "' lacks column/row tags");
        }
        if (need_label && !d.has_head(Head::label)) {
            throw TrainError(std::string(what) + " document '" + d.id +
                             "' lacks label tags; fine-tuning needs all three heads (phase/corpus mismatch)");
        }
    }
}

}  // namespace

TrainResult train(const std::vector<Document>& corpus, const std::vector<Document>* mix, const RunConfig& cfg_in,
                  const Tokenizer& tokenizer, const ModelParams<float>* init,
                  const std::function<void(const StepLog&)>& on_step) {
    RunConfig cfg = cfg_in;
    const TrainConfig& tc = cfg.train;
    tc.validate();
    cfg.model.vocab_size = tokenizer.size();
    cfg.model.validate();
    cfg.train.loss.phase = tc.phase;
    if (corpus.empty()) throw TrainError("training corpus is empty");
    const bool finetune = tc.phase == Phase::finetune;
    check_corpus(corpus, finetune, "training");
    const bool mixing = finetune && mix && !mix->empty() && tc.mix_fraction > 0.0;
    if (mixing) check_corpus(*mix, false, "mix");

    TrainResult result;
    if (init) {
        check_shapes(*init, cfg.model);
        result.params = *init;
    } else {
        result.params = init_params<float>(cfg.model, tc.seed);
    }
    result.optimizer = OptimizerState::zeros_like(result.params);

    // The whole batch schedule is drawn up front so the step count, and with
    // it the learning-rate schedule, is known before the first update.
    std::mt19937_64 rng(tc.seed);
    std::vector<std::vector<Slot>> batches;
    {
        std::bernoulli_distribution take_mix(mixing ? tc.mix_fraction : 0.0);
        std::uniform_int_distribution<int> mix_pick(0, mixing ? static_cast<int>(mix->size()) - 1 : 0);
        std::vector<int> order(corpus.size());
        for (int e = 0; e < tc.epochs; ++e) {
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            size_t pos = 0;
            while (pos < order.size()) {
                std::vector<Slot> batch;
                while (static_cast<int>(batch.size()) < tc.batch_size && pos < order.size()) {
                    if (mixing && take_mix(rng)) {
                        batch.push_back(Slot{true, mix_pick(rng)});
                    } else {
                        batch.push_back(Slot{false, order[pos++]});
                    }
                }
                batches.push_back(std::move(batch));
            }
        }
    }

    const long total = static_cast<long>(batches.size());
    auto params = tensor_refs(result.params);
    ModelParams<float> grads = result.params.zeros_like();
    auto grad_refs = tensor_refs(grads);
    auto m_refs = tensor_refs(result.optimizer.m);
    auto v_refs = tensor_refs(result.optimizer.v);

    for (long s = 0; s < total; ++s) {
        const auto& batch = batches[static_cast<size_t>(s)];
        grads.set_zero();
        StepLog log;
        log.step = s + 1;
        const float scale = 1.0f / static_cast<float>(batch.size());
        for (size_t b = 0; b < batch.size(); ++b) {
            const Slot slot = batch[b];
            const Document& src = slot.mixed ? (*mix)[static_cast<size_t>(slot.index)] : corpus[static_cast<size_t>(slot.index)];
            Document doc;
            if (tc.augment) {
                AugRng arng(derive_seed(tc.seed ^ derive_seed(tc.aug.seed, 0x61756775ULL), static_cast<std::uint64_t>(s) * 4096 + b));
                doc = augment(src, tc.aug, arng);
            } else {
                doc = src;
            }
            DocTargets targets = targets_from_document(doc);
            if (slot.mixed) {
                targets.label.clear();
                targets.label_masked = true;
            }
            const auto input = encode_input(doc, tokenizer, cfg.model.max_seq_len);
            auto loss = loss_and_grad<float>(result.params, cfg.model, input, targets, cfg.train.loss, &grads, scale);
            loss *= double(scale);
            log.loss += loss;
            log.mix_flags.push_back(slot.mixed ? 1 : 0);
        }
        if (!std::isfinite(log.loss.total)) {
            throw NumericError("non-finite loss at step " + std::to_string(s + 1));
        }
        log.grad_norm = clip_grad_norm(grads, tc.clip_norm);
        if (!std::isfinite(log.grad_norm)) throw NumericError("non-finite gradient at step " + std::to_string(s + 1));
        auto& opt = result.optimizer;
        ++opt.step;
        log.lr = lr_at(s + 1, total, tc.lr_peak, tc.warmup_fraction);
        for (size_t i = 0; i < params.size(); ++i) {
            adamw_update(flat(*params[i].mat), flat(*grad_refs[i].mat), flat(*m_refs[i].mat), flat(*v_refs[i].mat),
                         opt.step, log.lr, tc, params[i].decays);
        }
        if (on_step) on_step(log);
        result.log.push_back(std::move(log));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void append_floats(std::string& out, const Mat<float>& m) {
    const size_t n = static_cast<size_t>(m.size());
    const size_t at = out.size();
    out.resize(at + 4 * n);
    for (size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(m.data()[i]);
        for (int k = 0; k < 4; ++k) out[at + 4 * i + static_cast<size_t>(k)] = static_cast<char>((bits >> (8 * k)) & 0xff);
    }
}

void read_floats(const char* src, Mat<float>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + k])) << (8 * k);
        }
        m.data()[i] = std::bit_cast<float>(bits);
    }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    std::string blob;
    auto tensors = ojson::array();
    auto add = [&](const std::string& name, const Mat<float>& m) {
        ojson t;
        t["name"] = name;
        t["shape"] = {m.rows(), m.cols()};
        t["offset"] = blob.size();
        tensors.push_back(std::move(t));
        append_floats(blob, m);
    };
    ckpt.params.for_each([&](const std::string& name, const Mat<float>& m, bool) { add(name, m); });
    if (ckpt.optimizer) {
        ckpt.optimizer->m.for_each([&](const std::string& name, const Mat<float>& m, bool) { add("optimizer.m." + name, m); });
        ckpt.optimizer->v.for_each([&](const std::string& name, const Mat<float>& m, bool) { add("optimizer.v." + name, m); });
    }
    ojson meta;
    meta["config"] = ojson::parse(config_to_json(ckpt.config));
    meta["tokenizer"] = ckpt.tokenizer.words();
    if (ckpt.optimizer) meta["optimizer_step"] = ckpt.optimizer->step;
    meta["tensors"] = std::move(tensors);
    meta["data_bytes"] = blob.size();
    std::string out = std::string(kCheckpointMagic) + " v" + std::to_string(kCheckpointVersion) + "\n";
    out += meta.dump(-1, ' ', false, ojson::error_handler_t::replace);
    out += '\n';
    out += blob;
    return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed: " + path.string());
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    const size_t nl1 = bytes.find('\n');
    const std::string magic = std::string(kCheckpointMagic) + " v";
    if (nl1 == std::string::npos || bytes.compare(0, magic.size(), magic) != 0) {
        throw CheckpointError("not a checkpoint: missing '" + std::string(kCheckpointMagic) + "' header");
    }
    const std::string version = bytes.substr(magic.size(), nl1 - magic.size());
    if (version != std::to_string(kCheckpointVersion)) {
        throw CheckpointError("unsupported checkpoint version '" + version + "' (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    const size_t nl2 = bytes.find('\n', nl1 + 1);
    if (nl2 == std::string::npos) throw CheckpointError("corrupt checkpoint: truncated metadata");
    json meta;
    try {
        meta = json::parse(bytes.begin() + static_cast<long>(nl1) + 1, bytes.begin() + static_cast<long>(nl2));
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        const size_t data_bytes = meta.at("data_bytes").get<size_t>();
        const size_t available = bytes.size() - nl2 - 1;
        if (available < data_bytes) {
            throw CheckpointError("corrupt checkpoint: truncated tensor data (" + std::to_string(available) + " of " +
                                  std::to_string(data_bytes) + " bytes)");
        }
        const char* data = bytes.data() + nl2 + 1;
        ckpt.config = parse_config(meta.at("config").dump());
        ckpt.tokenizer = Tokenizer(meta.at("tokenizer").get<std::vector<std::string>>());

        struct Entry {
            long rows;
            long cols;
            size_t offset;
        };
        std::map<std::string, Entry> entries;
        for (const auto& t : meta.at("tensors")) {
            const auto shape = t.at("shape").get<std::vector<long>>();
            if (shape.size() != 2) throw CheckpointError("corrupt checkpoint: tensor shape must be 2-D");
            const Entry e{shape[0], shape[1], t.at("offset").get<size_t>()};
            if (e.rows < 0 || e.cols < 0 || e.offset + 4 * size_t(e.rows * e.cols) > data_bytes) {
                throw CheckpointError("corrupt checkpoint: tensor '" + t.at("name").get<std::string>() + "' out of range");
            }
            entries[t.at("name").get<std::string>()] = e;
        }
        auto fill = [&](const std::string& name, Mat<float>& m) {
            const auto it = entries.find(name);
            if (it == entries.end()) throw CheckpointError("corrupt checkpoint: missing tensor '" + name + "'");
            if (it->second.rows != m.rows() || it->second.cols != m.cols()) {
                throw ShapeError("tensor '" + name + "' has shape " + std::to_string(it->second.rows) + "x" +
                                 std::to_string(it->second.cols) + ", config expects " + std::to_string(m.rows()) +
                                 "x" + std::to_string(m.cols()));
            }
            read_floats(data + it->second.offset, m);
        };
        ckpt.params = init_params<float>(ckpt.config.model, 0);
        ckpt.params.for_each([&](const std::string& name, Mat<float>& m, bool) { fill(name, m); });
        if (meta.contains("optimizer_step")) {
            OptimizerState opt = OptimizerState::zeros_like(ckpt.params);
            opt.step = meta.at("optimizer_step").get<long>();
            opt.m.for_each([&](const std::string& name, Mat<float>& m, bool) { fill("optimizer.m." + name, m); });
            opt.v.for_each([&](const std::string& name, Mat<float>& m, bool) { fill("optimizer.v." + name, m); });
            ckpt.optimizer = std::move(opt);
        }
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("corrupt checkpoint metadata: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("corrupt checkpoint config: ") + e.what());
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const EncoderConfig& expected) {
    auto ckpt = load_checkpoint(path);
    EncoderConfig cfg = expected;
    if (cfg.vocab_size == 0) cfg.vocab_size = ckpt.tokenizer.size();
    check_shapes(ckpt.params, cfg);
    return ckpt;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

std::vector<int> argmax_rows(const Mat<float>& logits, int n) {
    std::vector<int> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::Index best = 0;
        logits.row(i).maxCoeff(&best);
        out[static_cast<size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

}  // namespace

TagSequences predict_tags(const ModelParams<float>& params, const EncoderConfig& cfg, const Tokenizer& tokenizer,
                          const Document& doc) {
    TagSequences t;
    if (doc.tokens.empty()) return t;
    const auto input = encode_input(doc, tokenizer, cfg.max_seq_len);
    const auto res = forward(params, cfg, input);
    const int n = input.valid_len;
    t.label = argmax_rows(res.out.label, n);
    t.column = argmax_rows(res.out.column, n);
    t.row = argmax_rows(res.out.row, n);
    return t;
}

MetricsReport evaluate(const ModelParams<float>& params, const EncoderConfig& cfg, const Tokenizer& tokenizer,
                       const std::vector<Document>& docs, const std::vector<ExtractedTable>& truth) {
    if (docs.size() != truth.size()) {
        throw std::invalid_argument("evaluate: " + std::to_string(docs.size()) + " documents but " +
                                    std::to_string(truth.size()) + " ground-truth tables");
    }
    const TagSchema schema(cfg.label_set);
    MetricsAccumulator acc(cfg.num_label_tags());
    for (size_t i = 0; i < docs.size(); ++i) {
        const auto pred = predict_tags(params, cfg, tokenizer, docs[i]);
        auto gold = gold_tags(docs[i]);
        if (!docs[i].has_head(Head::label)) gold.label.clear();
        acc.add_tags(pred, gold);
        acc.add_table(reconstruct(docs[i], pred, schema), truth[i]);
    }
    return acc.report();
}

}  // namespace tabtag
