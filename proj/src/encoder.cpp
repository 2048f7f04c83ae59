#include "tabtag/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace tabtag {

// ---------------------------------------------------------------------------
// Config and tokenizer

void EncoderConfig::validate() const {
    if (d <= 0 || d % kNumSpatialFeatures != 0) {
        throw std::invalid_argument("d must be a positive multiple of 6");
    }
    if (n_heads <= 0 || d % n_heads != 0) {
        throw std::invalid_argument("d must be divisible by n_heads");
    }
    if (n_layers < 0 || mlp_hidden <= 0 || max_seq_len <= 0) {
        throw std::invalid_argument("n_layers, mlp_hidden and max_seq_len must be positive");
    }
    if (vocab_size < 3) {
        throw std::invalid_argument("vocab_size must include the reserved tokens");
    }
    if (dropout_rate != 0.0) {
        throw std::invalid_argument("dropout is not supported (dropout_rate must be 0)");
    }
}

Tokenizer::Tokenizer() : Tokenizer(std::vector<std::string>{}) {}

Tokenizer::Tokenizer(std::vector<std::string> words) : words_(std::move(words)) {
    const std::vector<std::string> reserved{std::string(kPadText), std::string(kUnkText), std::string(kMaskText)};
    if (words_.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), words_.begin())) {
        if (!words_.empty()) {
            throw std::invalid_argument("tokenizer words must start with <pad>, <unk>, <mask>");
        }
        words_ = reserved;
    }
    for (size_t i = 0; i < words_.size(); ++i) {
        index_.emplace(words_[i], static_cast<int>(i));
    }
}

std::string Tokenizer::normalize(std::string_view word) {
    std::string out(word);
    for (auto& c : out) {
        if (std::isdigit(static_cast<unsigned char>(c))) c = '0';
    }
    return out;
}

int Tokenizer::id(std::string_view word) const {
    if (word == kMaskText) return kMask;
    const auto it = index_.find(normalize(word));
    if (it == index_.end() || it->second < 3) {
        return kUnk;
    }
    return it->second;
}

Tokenizer build_vocab(const std::vector<Document>& corpus, int min_count) {
    std::map<std::string, int> counts;
    for (const auto& doc : corpus) {
        for (const auto& t : doc.tokens) {
            if (t.text == Tokenizer::kMaskText) continue;
            ++counts[Tokenizer::normalize(t.text)];
        }
    }
    std::vector<std::pair<std::string, int>> kept;
    for (const auto& [w, c] : counts) {
        if (c >= min_count && w != Tokenizer::kPadText && w != Tokenizer::kUnkText && w != Tokenizer::kMaskText) kept.emplace_back(w, c);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> words{std::string(Tokenizer::kPadText), std::string(Tokenizer::kUnkText),
                                   std::string(Tokenizer::kMaskText)};
    for (auto& [w, c] : kept) words.push_back(std::move(w));
    return Tokenizer(std::move(words));
}

// ---------------------------------------------------------------------------
// Parameters

template <typename T>
size_t ModelParams<T>::num_parameters() const {
    size_t n = 0;
    for_each([&](const std::string&, const Mat<T>& m, bool) { n += static_cast<size_t>(m.size()); });
    return n;
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
    ModelParams<T> out = *this;
    out.set_zero();
    return out;
}

template <typename T>
void ModelParams<T>::set_zero() {
    for_each([](const std::string&, Mat<T>& m, bool) { m.setZero(); });
}

namespace {

template <typename T>
ModelParams<T> allocate_params(const EncoderConfig& cfg) {
    const int d = cfg.d;
    ModelParams<T> p;
    p.tok_emb = Mat<T>::Zero(cfg.vocab_size, d);
    p.pos_emb = Mat<T>::Zero(cfg.max_seq_len, d);
    for (auto& t : p.spatial.tables) t = Mat<T>::Zero(kNumBuckets, d / kNumSpatialFeatures);
    p.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& L : p.layers) {
        L.ln1_g = Mat<T>::Ones(1, d);
        L.ln1_b = Mat<T>::Zero(1, d);
        for (auto* w : {&L.wq, &L.wk, &L.wv, &L.wo}) *w = Mat<T>::Zero(d, d);
        for (auto* b : {&L.bq, &L.bk, &L.bv, &L.bo}) *b = Mat<T>::Zero(1, d);
        L.ln2_g = Mat<T>::Ones(1, d);
        L.ln2_b = Mat<T>::Zero(1, d);
        L.w1 = Mat<T>::Zero(cfg.mlp_hidden, d);
        L.b1 = Mat<T>::Zero(1, cfg.mlp_hidden);
        L.w2 = Mat<T>::Zero(d, cfg.mlp_hidden);
        L.b2 = Mat<T>::Zero(1, d);
    }
    p.lnf_g = Mat<T>::Ones(1, d);
    p.lnf_b = Mat<T>::Zero(1, d);
    p.label_w = Mat<T>::Zero(cfg.num_label_tags(), d);
    p.label_b = Mat<T>::Zero(1, cfg.num_label_tags());
    p.col_w = Mat<T>::Zero(kNumColumnClasses, d);
    p.col_b = Mat<T>::Zero(1, kNumColumnClasses);
    p.row_w = Mat<T>::Zero(kNumRowClasses, d);
    p.row_b = Mat<T>::Zero(1, kNumRowClasses);
    p.bbox_w = Mat<T>::Zero(kNumBoxOutputs, d);
    p.bbox_b = Mat<T>::Zero(1, kNumBoxOutputs);
    return p;
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    auto p = allocate_params<T>(cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    p.for_each([&](const std::string& name, Mat<T>& m, bool decays) {
        if (!decays || name.starts_with("spatial.")) return;
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
    });
    p.spatial = init_spatial<T>(cfg.d, cfg.spatial_init, seed ^ 0x5bd1e995ULL);
    return p;
}

template <typename T>
void check_shapes(const ModelParams<T>& params, const EncoderConfig& cfg) {
    const auto expected = allocate_params<T>(cfg);
    std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index>> want;
    expected.for_each([&](const std::string& name, const Mat<T>& m, bool) { want.emplace_back(name, m.rows(), m.cols()); });
    size_t i = 0;
    params.for_each([&](const std::string& name, const Mat<T>& m, bool) {
        if (i >= want.size()) throw ShapeError("unexpected tensor " + name);
        const auto& [wname, r, c] = want[i++];
        if (name != wname || m.rows() != r || m.cols() != c) {
            throw ShapeError("shape mismatch for tensor " + wname + ": expected " + std::to_string(r) + "x" +
                             std::to_string(c) + ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        }
    });
    if (i != want.size()) throw ShapeError("missing tensor " + std::get<0>(want[i]));
}

template <typename T>
bool all_finite(const ModelParams<T>& params) {
    bool ok = true;
    params.for_each([&](const std::string&, const Mat<T>& m, bool) { ok = ok && m.allFinite(); });
    return ok;
}

EncodedInput encode_input(const Document& doc, const Tokenizer& tokenizer, int max_seq_len) {
    if (static_cast<int>(doc.tokens.size()) > max_seq_len) {
        throw ShapeError("document '" + doc.id + "' has " + std::to_string(doc.tokens.size()) +
                         " tokens, exceeding max_seq_len " + std::to_string(max_seq_len));
    }
    EncodedInput in;
    in.ids.reserve(doc.tokens.size());
    in.boxes.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens) {
        in.ids.push_back(tokenizer.id(t.text));
        in.boxes.push_back(t.bbox);
    }
    in.valid_len = static_cast<int>(doc.tokens.size());
    return in;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
void layer_norm_forward(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& xhat, RowVec<T>& rstd,
                        Mat<T>& y) {
    const Eigen::Index n = x.rows();
    xhat.resize(n, x.cols());
    rstd.resize(n);
    y.resize(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const T mu = x.row(i).mean();
        xhat.row(i) = x.row(i).array() - mu;
        const T var = xhat.row(i).squaredNorm() / static_cast<T>(x.cols());
        const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        rstd(i) = r;
        xhat.row(i) *= r;
        y.row(i) = xhat.row(i).cwiseProduct(g.row(0)) + b.row(0);
    }
}

/// Adds the input gradient into dx.
template <typename T>
void layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const RowVec<T>& rstd, const Mat<T>& g, Mat<T>& dg,
                         Mat<T>& db, Mat<T>& dx) {
    const Eigen::Index n = dy.rows();
    const T inv_d = T(1) / static_cast<T>(dy.cols());
    dg.row(0) += (dy.cwiseProduct(xhat)).colwise().sum();
    db.row(0) += dy.colwise().sum();
    for (Eigen::Index i = 0; i < n; ++i) {
        const RowVec<T> dxhat = dy.row(i).cwiseProduct(g.row(0));
        const T m1 = dxhat.sum() * inv_d;
        const T m2 = dxhat.dot(xhat.row(i)) * inv_d;
        dx.row(i) += (rstd(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2)).matrix();
    }
}

template <typename T>
void linear(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b, Mat<T>& y) {
    y.noalias() = x * w.transpose();
    y.rowwise() += b.row(0);
}

/// dW += dyᵀ x, db += colsum(dy), dx (+)= dy W.
template <typename T>
void linear_backward(const Mat<T>& dy, const Mat<T>& x, const Mat<T>& w, Mat<T>& dw, Mat<T>& db, Mat<T>* dx,
                     bool accumulate_dx) {
    dw.noalias() += dy.transpose() * x;
    db.row(0) += dy.colwise().sum();
    if (dx) {
        if (accumulate_dx) {
            dx->noalias() += dy * w;
        } else {
            dx->noalias() = dy * w;
        }
    }
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
    const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(0.3989422804014327);
    return cdf + x * pdf;
}

template <typename T>
void check_finite(const Mat<T>& m, const std::string& where) {
    if (!m.allFinite()) {
        throw NumericError("non-finite values in " + where);
    }
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const ModelParams<T>& params, const EncoderConfig& cfg, const EncodedInput& input,
                         ForwardCache<T>* cache) {
    const int n = input.size();
    const int d = cfg.d;
    const int dh = d / cfg.n_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    if (n > params.pos_emb.rows()) {
        throw ShapeError("sequence of " + std::to_string(n) + " tokens exceeds position table of " +
                         std::to_string(params.pos_emb.rows()));
    }
    ForwardCache<T> local;
    ForwardCache<T>& c = cache ? *cache : local;
    c.input = input;
    c.layers.resize(params.layers.size());

    Mat<T> x(n, d);
    for (int i = 0; i < n; ++i) {
        x.row(i) = params.tok_emb.row(input.ids[static_cast<size_t>(i)]) + params.pos_emb.row(i);
        add_spatial_embed<T>(input.boxes[static_cast<size_t>(i)], params.spatial, x.row(i));
    }

    const int valid = std::clamp(input.valid_len, 0, n);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& L = params.layers[l];
        auto& lc = c.layers[l];
        lc.x_in = x;
        layer_norm_forward(x, L.ln1_g, L.ln1_b, lc.ln1_xhat, lc.ln1_rstd, lc.a1);
        linear(lc.a1, L.wq, L.bq, lc.q);
        linear(lc.a1, L.wk, L.bk, lc.k);
        linear(lc.a1, L.wv, L.bv, lc.v);
        lc.probs.resize(static_cast<size_t>(cfg.n_heads));
        lc.ctx.resize(n, d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            auto& P = lc.probs[static_cast<size_t>(h)];
            P.noalias() = (lc.q.middleCols(h * dh, dh) * lc.k.middleCols(h * dh, dh).transpose()) * scale;
            if (valid < n) {
                P.rightCols(n - valid).setConstant(-std::numeric_limits<T>::infinity());
            }
            for (int i = 0; i < n; ++i) {
                auto row = P.row(i);
                const T mx = row.maxCoeff();
                row = (row.array() - mx).exp();
                row /= row.sum();
            }
            lc.ctx.middleCols(h * dh, dh).noalias() = P * lc.v.middleCols(h * dh, dh);
        }
        Mat<T> attn_out;
        linear(lc.ctx, L.wo, L.bo, attn_out);
        lc.h = x + attn_out;
        layer_norm_forward(lc.h, L.ln2_g, L.ln2_b, lc.ln2_xhat, lc.ln2_rstd, lc.a2);
        linear(lc.a2, L.w1, L.b1, lc.u);
        lc.g = lc.u.unaryExpr([](T v) { return gelu(v); });
        Mat<T> mlp_out;
        linear(lc.g, L.w2, L.b2, mlp_out);
        x = lc.h + mlp_out;
        check_finite(x, "forward layer " + std::to_string(l));
    }
    c.x_final = x;
    layer_norm_forward(x, params.lnf_g, params.lnf_b, c.lnf_xhat, c.lnf_rstd, c.hidden);

    auto& out = c.out;
    linear(c.hidden, params.label_w, params.label_b, out.label);
    linear(c.hidden, params.col_w, params.col_b, out.column);
    linear(c.hidden, params.row_w, params.row_b, out.row);
    linear(c.hidden, params.bbox_w, params.bbox_b, out.bbox);
    out.bbox = out.bbox.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
    return ForwardResult<T>{c.hidden, out};
}

template <typename T>
void backward(const ModelParams<T>& params, const EncoderConfig& cfg, const ForwardCache<T>& c,
              const HeadOutputs<T>& dout, ModelParams<T>& grads) {
    const int n = c.input.size();
    const int d = cfg.d;
    const int dh = d / cfg.n_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    // Heads.
    const Mat<T> dbbox_pre = dout.bbox.cwiseProduct(c.out.bbox.cwiseProduct((T(1) - c.out.bbox.array()).matrix()));
    Mat<T> dhidden(n, d);
    linear_backward(dout.label, c.hidden, params.label_w, grads.label_w, grads.label_b, &dhidden, false);
    linear_backward(dout.column, c.hidden, params.col_w, grads.col_w, grads.col_b, &dhidden, true);
    linear_backward(dout.row, c.hidden, params.row_w, grads.row_w, grads.row_b, &dhidden, true);
    linear_backward(dbbox_pre, c.hidden, params.bbox_w, grads.bbox_w, grads.bbox_b, &dhidden, true);

    Mat<T> dx = Mat<T>::Zero(n, d);
    layer_norm_backward(dhidden, c.lnf_xhat, c.lnf_rstd, params.lnf_g, grads.lnf_g, grads.lnf_b, dx);
    check_finite(dx, "backward final layer norm");

    for (size_t li = params.layers.size(); li-- > 0;) {
        const auto& L = params.layers[li];
        auto& G = grads.layers[li];
        const auto& lc = c.layers[li];

        // MLP branch: x_out = h + W2 gelu(W1 ln2(h)).
        Mat<T> dgelu;
        linear_backward(dx, lc.g, L.w2, G.w2, G.b2, &dgelu, false);
        Mat<T> du = dgelu.cwiseProduct(lc.u.unaryExpr([](T v) { return gelu_grad(v); }));
        Mat<T> da2;
        linear_backward(du, lc.a2, L.w1, G.w1, G.b1, &da2, false);
        Mat<T> dh_total = dx;
        layer_norm_backward(da2, lc.ln2_xhat, lc.ln2_rstd, L.ln2_g, G.ln2_g, G.ln2_b, dh_total);

        // Attention branch: h = x + Wo ctx.
        Mat<T> dctx;
        linear_backward(dh_total, lc.ctx, L.wo, G.wo, G.bo, &dctx, false);
        Mat<T> dq(n, d), dk(n, d), dv(n, d);
        for (int h = 0; h < cfg.n_heads; ++h) {
            const auto& P = lc.probs[static_cast<size_t>(h)];
            const auto dO = dctx.middleCols(h * dh, dh);
            Mat<T> dP = dO * lc.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh).noalias() = P.transpose() * dO;
            const Eigen::Matrix<T, Eigen::Dynamic, 1> rowdot = dP.cwiseProduct(P).rowwise().sum();
            Mat<T> dS = P.cwiseProduct((dP.colwise() - rowdot)) * scale;
            dq.middleCols(h * dh, dh).noalias() = dS * lc.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh).noalias() = dS.transpose() * lc.q.middleCols(h * dh, dh);
        }
        Mat<T> da1;
        linear_backward(dq, lc.a1, L.wq, G.wq, G.bq, &da1, false);
        linear_backward(dk, lc.a1, L.wk, G.wk, G.bk, &da1, true);
        linear_backward(dv, lc.a1, L.wv, G.wv, G.bv, &da1, true);
        dx = dh_total;
        layer_norm_backward(da1, lc.ln1_xhat, lc.ln1_rstd, L.ln1_g, G.ln1_g, G.ln1_b, dx);
        check_finite(dx, "backward layer " + std::to_string(li));
    }

    for (int i = 0; i < n; ++i) {
        grads.tok_emb.row(c.input.ids[static_cast<size_t>(i)]) += dx.row(i);
        grads.pos_emb.row(i) += dx.row(i);
        accumulate_spatial_grad<T>(dx.row(i), c.input.boxes[static_cast<size_t>(i)], grads.spatial);
    }
}

template <typename T>
LossBreakdown loss_and_grad(const ModelParams<T>& params, const EncoderConfig& cfg, const EncodedInput& input,
                            const DocTargets& targets, const LossConfig& loss_cfg, ModelParams<T>* grads, T scale) {
    if (!grads) {
        const auto res = forward(params, cfg, input);
        return total_loss<T>(res.out, targets, loss_cfg);
    }
    ForwardCache<T> cache;
    forward(params, cfg, input, &cache);
    HeadOutputs<T> dout;
    const auto loss = total_loss<T>(cache.out, targets, loss_cfg, &dout, scale);
    backward(params, cfg, cache, dout, *grads);
    return loss;
}

// ---------------------------------------------------------------------------
// Gradient check

double gradcheck_rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

double GradcheckReport::max_rel_error() const {
    double m = 0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
}

GradcheckReport gradcheck(EncoderConfig cfg, std::uint64_t seed, const GradcheckOptions& opts) {
    if (cfg.vocab_size < 3) cfg.vocab_size = 16;
    cfg.validate();
    std::mt19937_64 rng(seed);
    auto params = init_params<double>(cfg, seed);
    // Move biases and layer-norm parameters off their trivial init values.
    std::normal_distribution<double> jitter(0.0, 0.1);
    params.for_each([&](const std::string&, Mat<double>& m, bool decays) {
        if (decays) return;
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += jitter(rng);
    });

    const int n = std::max(3, opts.num_tokens);
    std::uniform_int_distribution<int> word(3, cfg.vocab_size - 1);
    std::uniform_int_distribution<int> coord(0, kCoordMax);
    EncodedInput input;
    for (int i = 0; i < n; ++i) {
        input.ids.push_back(word(rng));
        const int x0 = coord(rng), x1 = coord(rng), y0 = coord(rng), y1 = coord(rng);
        input.boxes.push_back({std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)});
    }
    // The last position is padding.
    input.ids.back() = Tokenizer::kPad;
    input.valid_len = n - 1;

    DocTargets targets;
    std::uniform_int_distribution<int> label(0, cfg.num_label_tags() - 1);
    std::uniform_int_distribution<int> row(0, kNumRowClasses - 1);
    // Two gold columns with two or more members so the consistency term is live.
    const std::array<int, 5> col_pattern{TagVocabulary::make(TagPrefix::B, 1), TagVocabulary::make(TagPrefix::I, 1),
                                         TagVocabulary::make(TagPrefix::B, 4), TagVocabulary::make(TagPrefix::IB, 4),
                                         0};
    for (int i = 0; i < n; ++i) {
        targets.label.push_back(label(rng));
        targets.column.push_back(col_pattern[static_cast<size_t>(i) % col_pattern.size()]);
        targets.row.push_back(row(rng));
        targets.boxes.push_back(input.boxes[static_cast<size_t>(i)]);
        targets.mask.push_back(i < input.valid_len ? 1 : 0);
    }
    LossConfig loss_cfg;

    auto analytic = params.zeros_like();
    loss_and_grad<double>(params, cfg, input, targets, loss_cfg, &analytic);
    if (opts.corrupt_analytic) opts.corrupt_analytic(analytic);

    std::vector<Mat<double>*> grad_tensors;
    analytic.for_each([&](const std::string&, Mat<double>& m, bool) { grad_tensors.push_back(&m); });

    GradcheckReport report;
    size_t ti = 0;
    params.for_each([&](const std::string& name, Mat<double>& m, bool) {
        const Mat<double>& g = *grad_tensors[ti++];
        const Eigen::Index size = m.size();
        std::vector<Eigen::Index> picks;
        if (size <= opts.samples_per_tensor) {
            picks.resize(static_cast<size_t>(size));
            std::iota(picks.begin(), picks.end(), Eigen::Index{0});
        } else {
            // Half the largest-magnitude analytic entries, half uniform.
            std::vector<Eigen::Index> order(static_cast<size_t>(size));
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            const size_t top = static_cast<size_t>(opts.samples_per_tensor / 2);
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                              [&](Eigen::Index a, Eigen::Index b) {
                                  return std::abs(g.data()[a]) > std::abs(g.data()[b]);
                              });
            picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top));
            std::uniform_int_distribution<Eigen::Index> any(0, size - 1);
            while (picks.size() < static_cast<size_t>(opts.samples_per_tensor)) picks.push_back(any(rng));
        }
        GradcheckEntry entry{name, 0.0, 0};
        for (const auto idx : picks) {
            double& v = m.data()[idx];
            const double saved = v;
            v = saved + opts.step;
            const double lp = loss_and_grad<double>(params, cfg, input, targets, loss_cfg, nullptr).total;
            v = saved - opts.step;
            const double lm = loss_and_grad<double>(params, cfg, input, targets, loss_cfg, nullptr).total;
            v = saved;
            const double numeric = (lp - lm) / (2 * opts.step);
            entry.max_rel_error = std::max(entry.max_rel_error, gradcheck_rel_error(g.data()[idx], numeric));
            ++entry.entries_checked;
        }
        report.entries.push_back(entry);
    });
    return report;
}

#define TABTAG_INSTANTIATE_ENCODER(T)                                                                             \
    template struct ModelParams<T>;                                                                               \
    template ModelParams<T> init_params<T>(const EncoderConfig&, std::uint64_t);                                  \
    template void check_shapes<T>(const ModelParams<T>&, const EncoderConfig&);                                   \
    template bool all_finite<T>(const ModelParams<T>&);                                                           \
    template ForwardResult<T> forward<T>(const ModelParams<T>&, const EncoderConfig&, const EncodedInput&,         \
                                         ForwardCache<T>*);                                                       \
    template void backward<T>(const ModelParams<T>&, const EncoderConfig&, const ForwardCache<T>&,                \
                              const HeadOutputs<T>&, ModelParams<T>&);                                            \
    template LossBreakdown loss_and_grad<T>(const ModelParams<T>&, const EncoderConfig&, const EncodedInput&,     \
                                            const DocTargets&, const LossConfig&, ModelParams<T>*, T);

TABTAG_INSTANTIATE_ENCODER(float)
TABTAG_INSTANTIATE_ENCODER(double)

}  // namespace tabtag
