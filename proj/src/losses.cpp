#include "tabtag/losses.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace tabtag {

Phase parse_phase(std::string_view s) {
    if (s == "pretrain") return Phase::pretrain;
    if (s == "finetune") return Phase::finetune;
    throw std::invalid_argument("unknown phase '" + std::string(s) + "'");
}

std::string_view phase_name(Phase phase) { return phase == Phase::pretrain ? "pretrain" : "finetune"; }

HeadWeights effective_weights(const LossConfig& cfg) {
    if (cfg.phase == Phase::finetune) {
        return {cfg.w_label, cfg.w_col, cfg.w_row};
    }
    const double s = cfg.w_col + cfg.w_row;
    if (s <= 0) {
        return {0, 0, 0};
    }
    return {0, cfg.w_col / s, cfg.w_row / s};
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    ce_label += o.ce_label;
    ce_col += o.ce_col;
    ce_row += o.ce_row;
    mse_bbox += o.mse_bbox;
    consistency += o.consistency;
    total += o.total;
    return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s) {
    ce_label *= s;
    ce_col *= s;
    ce_row *= s;
    mse_bbox *= s;
    consistency *= s;
    total *= s;
    return *this;
}

LossBreakdown combine_loss(double ce_label, double ce_col, double ce_row, double mse_bbox, double consistency,
                           const LossConfig& cfg, bool label_active) {
    const auto w = effective_weights(cfg);
    LossBreakdown b{ce_label, ce_col, ce_row, mse_bbox, consistency, 0};
    b.total = (label_active ? w.label * ce_label : 0.0) + w.col * ce_col + w.row * ce_row +
              cfg.lambda_bbox * mse_bbox + cfg.lambda_consistency * consistency;
    return b;
}

namespace {

size_t count_active(std::span<const std::uint8_t> mask) {
    size_t n = 0;
    for (const auto m : mask) n += m ? 1 : 0;
    return n;
}

void check_rows(Eigen::Index rows, size_t n, const char* what) {
    if (static_cast<size_t>(rows) != n) {
        throw LossError(std::string(what) + ": row count does not match target length");
    }
}

}  // namespace

template <typename T>
T cross_entropy(const Mat<T>& logits, std::span<const int> gold, std::span<const std::uint8_t> mask, Mat<T>* grad,
                T scale) {
    const size_t n = gold.size();
    check_rows(logits.rows(), n, "cross_entropy");
    if (grad) {
        grad->setZero(logits.rows(), logits.cols());
    }
    const size_t active = count_active(mask);
    if (active == 0) {
        return T(0);
    }
    const T inv = T(1) / static_cast<T>(active);
    T loss = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const auto row = logits.row(static_cast<Eigen::Index>(i));
        const T mx = row.maxCoeff();
        const T sum = (row.array() - mx).exp().sum();
        const T lse = mx + std::log(sum);
        loss += lse - row(gold[i]);
        if (grad) {
            auto g = grad->row(static_cast<Eigen::Index>(i));
            g = ((row.array() - lse).exp() * (scale * inv)).matrix();
            g(gold[i]) -= scale * inv;
        }
    }
    return loss * inv;
}

template <typename T>
T bbox_mse(const Mat<T>& pred, std::span<const BBox> gold, std::span<const std::uint8_t> mask, Mat<T>* grad,
           T scale) {
    const size_t n = gold.size();
    check_rows(pred.rows(), n, "bbox_mse");
    if (grad) {
        grad->setZero(pred.rows(), 4);
    }
    const size_t active = count_active(mask);
    if (active == 0) {
        return T(0);
    }
    const T inv = T(1) / static_cast<T>(4 * active);
    T loss = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const std::array<int, 4> g{gold[i].x_min, gold[i].y_min, gold[i].x_max, gold[i].y_max};
        for (int c = 0; c < 4; ++c) {
            const T diff = pred(static_cast<Eigen::Index>(i), c) - static_cast<T>(g[static_cast<size_t>(c)]) / T(kCoordMax);
            loss += diff * diff;
            if (grad) {
                (*grad)(static_cast<Eigen::Index>(i), c) = T(2) * diff * inv * scale;
            }
        }
    }
    return loss * inv;
}

template <typename T>
std::vector<T> soft_column_assignment(const Mat<T>& col_logits) {
    const Eigen::Index n = col_logits.rows();
    const Eigen::Index k = col_logits.cols();
    std::vector<T> out(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto z = col_logits.row(i).segment(1, k - 1);
        const T mx = z.maxCoeff();
        T denom = 0;
        T num = 0;
        for (Eigen::Index j = 0; j < k - 1; ++j) {
            const T e = std::exp(z(j) - mx);
            denom += e;
            num += e * static_cast<T>(j / 3);
        }
        out[static_cast<size_t>(i)] = num / denom;
    }
    return out;
}

template <typename T>
T consistency_loss(const Mat<T>& col_logits, std::span<const int> gold_col, std::span<const std::uint8_t> mask,
                   Mat<T>* grad, T scale) {
    const size_t n = gold_col.size();
    check_rows(col_logits.rows(), n, "consistency_loss");
    if (grad) {
        grad->setZero(col_logits.rows(), col_logits.cols());
    }
    std::map<int, std::vector<size_t>> groups;
    for (size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        if (const auto c = column_tag_index(gold_col[i])) {
            groups[*c].push_back(i);
        }
    }
    if (groups.empty()) {
        return T(0);
    }
    const auto y = soft_column_assignment(col_logits);
    const Eigen::Index k = col_logits.cols();
    T loss = 0;
    for (const auto& [col, members] : groups) {
        const T m = static_cast<T>(members.size());
        T mean = 0;
        for (const auto i : members) mean += y[i];
        mean /= m;
        T var = 0;
        for (const auto i : members) var += (y[i] - mean) * (y[i] - mean);
        var /= m;
        loss += var;
        if (!grad) continue;
        for (const auto i : members) {
            // d var / d y_i; the mean's own dependence sums to zero.
            const T dy = scale * T(2) * (y[i] - mean) / m;
            const auto z = col_logits.row(static_cast<Eigen::Index>(i)).segment(1, k - 1);
            const T mx = z.maxCoeff();
            const auto e = (z.array() - mx).exp();
            const T denom = e.sum();
            for (Eigen::Index j = 0; j < k - 1; ++j) {
                const T p = e(j) / denom;
                (*grad)(static_cast<Eigen::Index>(i), j + 1) += dy * p * (static_cast<T>(j / 3) - y[i]);
            }
        }
    }
    return loss;
}

DocTargets targets_from_document(const Document& doc) {
    DocTargets t;
    const bool has_label = doc.has_head(Head::label);
    for (const auto& tok : doc.tokens) {
        if (has_label) t.label.push_back(*tok.label_tag);
        t.column.push_back(tok.col_tag.value_or(0));
        t.row.push_back(tok.row_tag.value_or(0));
        t.boxes.push_back(tok.bbox);
        t.mask.push_back(1);
    }
    if (!doc.has_head(Head::column)) t.column.clear();
    if (!doc.has_head(Head::row)) t.row.clear();
    return t;
}

template <typename T>
LossBreakdown total_loss(const HeadOutputs<T>& out, const DocTargets& gold, const LossConfig& cfg,
                         HeadOutputs<T>* grads, T scale) {
    const size_t n = gold.mask.size();
    if (gold.column.size() != n || gold.row.size() != n || gold.boxes.size() != n) {
        throw LossError("document is missing column or row gold tags");
    }
    const bool label_active = cfg.phase == Phase::finetune && !gold.label_masked;
    if (label_active && gold.label.size() != n) {
        throw LossError("finetune document is missing label gold tags");
    }
    const auto w = effective_weights(cfg);
    const T w_label = label_active ? static_cast<T>(w.label) : T(0);
    Mat<T>* g_label = grads ? &grads->label : nullptr;
    Mat<T>* g_col = grads ? &grads->column : nullptr;
    Mat<T>* g_row = grads ? &grads->row : nullptr;
    Mat<T>* g_bbox = grads ? &grads->bbox : nullptr;

    double ce_label = 0;
    if (label_active) {
        ce_label = cross_entropy<T>(out.label, gold.label, gold.mask, g_label, scale * w_label);
    } else if (grads) {
        grads->label.setZero(out.label.rows(), out.label.cols());
    }
    const double ce_col = cross_entropy<T>(out.column, gold.column, gold.mask, g_col, scale * static_cast<T>(w.col));
    const double ce_row = cross_entropy<T>(out.row, gold.row, gold.mask, g_row, scale * static_cast<T>(w.row));
    const double mse = bbox_mse<T>(out.bbox, gold.boxes, gold.mask, g_bbox, scale * static_cast<T>(cfg.lambda_bbox));
    double cons = 0;
    if (grads) {
        Mat<T> g_cons;
        cons = consistency_loss<T>(out.column, gold.column, gold.mask, &g_cons,
                                   scale * static_cast<T>(cfg.lambda_consistency));
        grads->column += g_cons;
    } else {
        cons = consistency_loss<T>(out.column, gold.column, gold.mask);
    }
    return combine_loss(ce_label, ce_col, ce_row, mse, cons, cfg, label_active);
}

#define TABTAG_INSTANTIATE_LOSSES(T)                                                                            \
    template T cross_entropy<T>(const Mat<T>&, std::span<const int>, std::span<const std::uint8_t>, Mat<T>*, T); \
    template T bbox_mse<T>(const Mat<T>&, std::span<const BBox>, std::span<const std::uint8_t>, Mat<T>*, T);     \
    template T consistency_loss<T>(const Mat<T>&, std::span<const int>, std::span<const std::uint8_t>, Mat<T>*, \
                                   T);                                                                          \
    template std::vector<T> soft_column_assignment<T>(const Mat<T>&);                                           \
    template LossBreakdown total_loss<T>(const HeadOutputs<T>&, const DocTargets&, const LossConfig&,            \
                                         HeadOutputs<T>*, T);

TABTAG_INSTANTIATE_LOSSES(float)
TABTAG_INSTANTIATE_LOSSES(double)

}  // namespace tabtag
