#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tabtag/augment.hpp"
#include "tabtag/encoder.hpp"
#include "tabtag/losses.hpp"
#include "tabtag/metrics.hpp"
#include "tabtag/table.hpp"

namespace tabtag {

struct TrainConfig {
    Phase phase = Phase::pretrain;
    double lr_peak = 1e-4;
    double warmup_fraction = 0.1;
    int epochs = 5;
    int batch_size = 8;
    std::uint64_t seed = 0;
    bool augment = true;
    AugConfig aug;
    LossConfig loss;
    double mix_fraction = 0.3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double clip_norm = 1.0;
    /// Minimum corpus frequency for a word to enter the vocabulary.
    int min_count = 2;

    /// Phase defaults: lr 1e-4 and 5 epochs for pretraining, 5e-5 and 10
    /// epochs for fine-tuning.
    static TrainConfig defaults(Phase phase);
    /// Throws std::invalid_argument.
    void validate() const;
};

/// Model, training, loss and augmentation settings as read from a config file.
struct RunConfig {
    EncoderConfig model;
    TrainConfig train;
};

/// Missing fields keep their defaults; unknown fields are rejected. A given
/// `phase` overrides the file's and selects the defaults.
RunConfig parse_config(const std::string& json_text, std::optional<Phase> phase = std::nullopt);
RunConfig load_config(const std::filesystem::path& path, std::optional<Phase> phase = std::nullopt);
std::string config_to_json(const RunConfig& cfg);

/// Linear warmup over ceil(warmup_fraction * total) steps, then cosine decay
/// to zero at `total_steps`.
double lr_at(long step, long total_steps, double lr_peak, double warmup_fraction = 0.1);

struct OptimizerState {
    ModelParams<float> m;
    ModelParams<float> v;
    long step = 0;

    static OptimizerState zeros_like(const ModelParams<float>& params);
};

/// One Adam step with decoupled weight decay on a flat tensor. `t` is the
/// 1-based step count used for bias correction.
void adamw_update(std::span<float> param, std::span<const float> grad, std::span<float> m, std::span<float> v,
                  long t, double lr, const TrainConfig& cfg, bool decays);

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
double clip_grad_norm(ModelParams<float>& grads, double max_norm);

class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepLog {
    long step = 0;
    double lr = 0;
    LossBreakdown loss;
    double grad_norm = 0;
    /// 1 for each batch example drawn from the structure-only mix corpus.
    std::vector<std::uint8_t> mix_flags;
};

std::string step_log_json(const StepLog& log);

struct TrainResult {
    ModelParams<float> params;
    OptimizerState optimizer;
    std::vector<StepLog> log;
};

/// Two-phase trainer. Pretraining needs column and row tags on `corpus`;
/// fine-tuning needs all three heads on `corpus` and column/row tags on
/// `mix`. Without `init`, parameters are freshly initialized from the seed.
/// Throws TrainError on a corpus/phase mismatch.
TrainResult train(const std::vector<Document>& corpus, const std::vector<Document>* mix, const RunConfig& cfg,
                  const Tokenizer& tokenizer, const ModelParams<float>* init = nullptr,
                  const std::function<void(const StepLog&)>& on_step = {});

struct Checkpoint {
    RunConfig config;
    Tokenizer tokenizer;
    ModelParams<float> params;
    std::optional<OptimizerState> optimizer;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kCheckpointMagic = "SPBERT-CKPT";
inline constexpr int kCheckpointVersion = 1;

/// Header line, one line of JSON metadata, then little-endian float32
/// tensor data in the order listed by the metadata.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on a bad header, unsupported version or truncated
/// data, and ShapeError when a tensor disagrees with the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(const std::string& bytes);
/// As load_checkpoint, then checks every tensor against `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const EncoderConfig& expected);

/// Argmax tags of every head for one document.
TagSequences predict_tags(const ModelParams<float>& params, const EncoderConfig& cfg, const Tokenizer& tokenizer,
                          const Document& doc);

/// Runs inference, reconstruction and metrics over a corpus. Tables are
/// matched to `truth` by position.
MetricsReport evaluate(const ModelParams<float>& params, const EncoderConfig& cfg, const Tokenizer& tokenizer,
                       const std::vector<Document>& docs, const std::vector<ExtractedTable>& truth);

}  // namespace tabtag
