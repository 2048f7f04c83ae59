#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tabtag/doc_model.hpp"
#include "tabtag/losses.hpp"
#include "tabtag/spatial.hpp"
#include "tabtag/tensor.hpp"

namespace tabtag {

inline constexpr int kNumColumnClasses = 31;
inline constexpr int kNumRowClasses = 7;
inline constexpr int kNumBoxOutputs = 4;

struct EncoderConfig {
    int d = 96;
    int n_layers = 2;
    int n_heads = 4;
    int mlp_hidden = 384;
    int max_seq_len = 512;
    int vocab_size = 0;
    double dropout_rate = 0.0;
    SpatialInit spatial_init = SpatialInit::random_normal;
    std::vector<std::string> label_set = default_label_set();

    int num_label_tags() const { return 1 + 3 * static_cast<int>(label_set.size()); }
    /// Throws std::invalid_argument on inconsistent dimensions.
    void validate() const;
};

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Word-level vocabulary. Digits are folded to '0' before lookup so numbers
/// of the same format share an id.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kMask = 2;
    static constexpr std::string_view kPadText = "<pad>";
    static constexpr std::string_view kUnkText = "<unk>";
    static constexpr std::string_view kMaskText = "<mask>";

    Tokenizer();
    /// `words` in id order, starting with the three reserved entries.
    explicit Tokenizer(std::vector<std::string> words);

    static std::string normalize(std::string_view word);

    int id(std::string_view word) const;
    int size() const { return static_cast<int>(words_.size()); }
    const std::vector<std::string>& words() const { return words_; }

    bool operator==(const Tokenizer& o) const { return words_ == o.words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
};

/// Vocabulary of every normalized word with frequency >= min_count, ordered
/// by (frequency desc, lexical), after the reserved tokens.
Tokenizer build_vocab(const std::vector<Document>& corpus, int min_count);

template <typename T>
struct LayerParams {
    Mat<T> ln1_g, ln1_b;
    Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Mat<T> ln2_g, ln2_b;
    Mat<T> w1, b1, w2, b2;
};

/// All learnable tensors. Weight matrices are stored out x in; biases and
/// layer-norm parameters as 1 x n.
template <typename T>
struct ModelParams {
    Mat<T> tok_emb;
    Mat<T> pos_emb;
    SpatialTables<T> spatial;
    std::vector<LayerParams<T>> layers;
    Mat<T> lnf_g, lnf_b;
    Mat<T> label_w, label_b;
    Mat<T> col_w, col_b;
    Mat<T> row_w, row_b;
    Mat<T> bbox_w, bbox_b;

    /// Visits every tensor in canonical order as (name, tensor, decays).
    /// Layer-norm and bias tensors report decays == false.
    template <typename F>
    void for_each(F&& f) {
        visit(*this, f);
    }
    template <typename F>
    void for_each(F&& f) const {
        visit(*this, f);
    }

    size_t num_parameters() const;
    ModelParams zeros_like() const;
    void set_zero();

private:
    template <typename Self, typename F>
    static void visit(Self& self, F& f) {
        f("tok_emb", self.tok_emb, true);
        f("pos_emb", self.pos_emb, true);
        for (int p = 0; p < kNumSpatialFeatures; ++p) {
            f("spatial." + std::string(kSpatialFeatureNames[static_cast<size_t>(p)]), self.spatial.tables[static_cast<size_t>(p)], true);
        }
        for (size_t l = 0; l < self.layers.size(); ++l) {
            auto& L = self.layers[l];
            const std::string pre = "layers." + std::to_string(l) + ".";
            f(pre + "ln1_g", L.ln1_g, false);
            f(pre + "ln1_b", L.ln1_b, false);
            f(pre + "wq", L.wq, true);
            f(pre + "bq", L.bq, false);
            f(pre + "wk", L.wk, true);
            f(pre + "bk", L.bk, false);
            f(pre + "wv", L.wv, true);
            f(pre + "bv", L.bv, false);
            f(pre + "wo", L.wo, true);
            f(pre + "bo", L.bo, false);
            f(pre + "ln2_g", L.ln2_g, false);
            f(pre + "ln2_b", L.ln2_b, false);
            f(pre + "w1", L.w1, true);
            f(pre + "b1", L.b1, false);
            f(pre + "w2", L.w2, true);
            f(pre + "b2", L.b2, false);
        }
        f("lnf_g", self.lnf_g, false);
        f("lnf_b", self.lnf_b, false);
        f("head.label_w", self.label_w, true);
        f("head.label_b", self.label_b, false);
        f("head.col_w", self.col_w, true);
        f("head.col_b", self.col_b, false);
        f("head.row_w", self.row_w, true);
        f("head.row_b", self.row_b, false);
        f("head.bbox_w", self.bbox_w, true);
        f("head.bbox_b", self.bbox_b, false);
    }
};

/// Fresh parameters: N(0, 0.02^2) weights and embeddings, zero biases, unit
/// layer-norm gains, spatial tables per `cfg.spatial_init`.
template <typename T>
ModelParams<T> init_params(const EncoderConfig& cfg, std::uint64_t seed);

/// Throws ShapeError naming the first tensor that disagrees with `cfg`.
template <typename T>
void check_shapes(const ModelParams<T>& params, const EncoderConfig& cfg);

template <typename T>
bool all_finite(const ModelParams<T>& params);

/// Token ids and boxes for one sequence. Positions at or beyond `valid_len`
/// are padding: masked out as attention keys and excluded from losses.
struct EncodedInput {
    std::vector<int> ids;
    std::vector<BBox> boxes;
    int valid_len = 0;

    int size() const { return static_cast<int>(ids.size()); }
};

/// Throws ShapeError when the document is longer than `max_seq_len`.
EncodedInput encode_input(const Document& doc, const Tokenizer& tokenizer, int max_seq_len);

template <typename T>
struct LayerCache {
    Mat<T> x_in;
    Mat<T> ln1_xhat;
    RowVec<T> ln1_rstd;
    Mat<T> a1, q, k, v;
    std::vector<Mat<T>> probs;
    Mat<T> ctx;
    Mat<T> h;
    Mat<T> ln2_xhat;
    RowVec<T> ln2_rstd;
    Mat<T> a2, u, g;
};

template <typename T>
struct ForwardCache {
    EncodedInput input;
    std::vector<LayerCache<T>> layers;
    Mat<T> x_final;
    Mat<T> lnf_xhat;
    RowVec<T> lnf_rstd;
    Mat<T> hidden;
    HeadOutputs<T> out;
};

template <typename T>
struct ForwardResult {
    Mat<T> hidden;
    HeadOutputs<T> out;
};

/// Embeddings (token + spatial + position), pre-norm transformer blocks,
/// final layer norm, then the label/column/row/bbox heads.
template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, const EncoderConfig& cfg, const EncodedInput& input,
                         ForwardCache<T>* cache = nullptr);

/// Reverse pass. `dout` holds gradients with respect to every head output;
/// gradients are accumulated (added) into `grads`.
template <typename T>
void backward(const ModelParams<T>& params, const EncoderConfig& cfg, const ForwardCache<T>& cache,
              const HeadOutputs<T>& dout, ModelParams<T>& grads);

/// Forward, loss and backward for one document. Adds scale * gradient into
/// `grads` when given; returns the unscaled breakdown.
template <typename T>
LossBreakdown loss_and_grad(const ModelParams<T>& params, const EncoderConfig& cfg, const EncodedInput& input,
                            const DocTargets& targets, const LossConfig& loss_cfg, ModelParams<T>* grads,
                            T scale = T(1));

struct GradcheckEntry {
    std::string tensor;
    double max_rel_error = 0;
    int entries_checked = 0;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double max_rel_error() const;
    bool passed(double tol) const { return max_rel_error() < tol; }
};

struct GradcheckOptions {
    double step = 1e-3;
    int samples_per_tensor = 24;
    int num_tokens = 6;
    /// Test hook: applied to the analytic gradient before comparison.
    std::function<void(ModelParams<double>&)> corrupt_analytic;
};

/// Compares analytic gradients with central finite differences on a random
/// model and document, in double precision.
GradcheckReport gradcheck(EncoderConfig cfg, std::uint64_t seed, const GradcheckOptions& opts = {});

/// Relative error used by gradcheck.
double gradcheck_rel_error(double analytic, double numeric);

}  // namespace tabtag
