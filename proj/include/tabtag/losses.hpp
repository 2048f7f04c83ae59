#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tabtag/doc_model.hpp"
#include "tabtag/tensor.hpp"

namespace tabtag {

enum class Phase : std::uint8_t { pretrain, finetune };

Phase parse_phase(std::string_view s);
std::string_view phase_name(Phase phase);

struct LossConfig {
    double w_label = 0.3;
    double w_col = 0.6;
    double w_row = 0.1;
    double lambda_bbox = 0.1;
    double lambda_consistency = 0.1;
    Phase phase = Phase::finetune;
};

/// Head weights actually applied: pretrain zeroes the label weight and
/// renormalizes (w_col, w_row) to sum to one.
struct HeadWeights {
    double label;
    double col;
    double row;
};
HeadWeights effective_weights(const LossConfig& cfg);

struct LossBreakdown {
    double ce_label = 0;
    double ce_col = 0;
    double ce_row = 0;
    double mse_bbox = 0;
    double consistency = 0;
    double total = 0;

    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown& operator*=(double s);
};

/// Weighted sum of components. `label_active` false drops ce_label from the
/// total (structure-only examples mixed into fine-tuning).
LossBreakdown combine_loss(double ce_label, double ce_col, double ce_row, double mse_bbox, double consistency,
                           const LossConfig& cfg, bool label_active = true);

/// Mean over unmasked tokens of -log softmax(logits)[gold]; 0 when every
/// token is masked. When `grad` is given it receives scale * dLoss/dlogits.
template <typename T>
T cross_entropy(const Mat<T>& logits, std::span<const int> gold, std::span<const std::uint8_t> mask,
                Mat<T>* grad = nullptr, T scale = T(1));

/// Squared error between `pred` (n x 4, in [0,1]) and gold boxes / 1000,
/// averaged over unmasked tokens and the four channels.
template <typename T>
T bbox_mse(const Mat<T>& pred, std::span<const BBox> gold, std::span<const std::uint8_t> mask,
           Mat<T>* grad = nullptr, T scale = T(1));

/// Sum over gold columns of the population variance of soft column
/// assignments. The soft assignment of a token is the expected column index
/// under the softmax restricted to the 30 non-O column tags.
template <typename T>
T consistency_loss(const Mat<T>& col_logits, std::span<const int> gold_col, std::span<const std::uint8_t> mask,
                   Mat<T>* grad = nullptr, T scale = T(1));

/// Soft column assignment of each token (the quantity whose variance the
/// consistency loss measures).
template <typename T>
std::vector<T> soft_column_assignment(const Mat<T>& col_logits);

template <typename T>
struct HeadOutputs {
    Mat<T> label;
    Mat<T> column;
    Mat<T> row;
    Mat<T> bbox;  // sigmoid-squashed, n x 4
};

/// Gold targets of one document. An empty `label` means the document has no
/// label annotation; `label_masked` marks it as a structure-only example
/// whose label loss is deliberately skipped.
struct DocTargets {
    std::vector<int> label;
    std::vector<int> column;
    std::vector<int> row;
    std::vector<BBox> boxes;
    std::vector<std::uint8_t> mask;
    bool label_masked = false;
};

class LossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

DocTargets targets_from_document(const Document& doc);

/// Full per-document loss. When `grads` is given, it receives scale times the
/// gradient of the total with respect to every head output (bbox gradient is
/// with respect to the sigmoid output).
template <typename T>
LossBreakdown total_loss(const HeadOutputs<T>& out, const DocTargets& gold, const LossConfig& cfg,
                         HeadOutputs<T>* grads = nullptr, T scale = T(1));

}  // namespace tabtag
