#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tabtag/doc_model.hpp"
#include "tabtag/tagging.hpp"

namespace tabtag {

struct AugConfig {
    double spatial_sigma = 5.0;
    double mask_rate_max = 0.2;
    double token_dropout_p = 0.1;
    bool numeric_substitution = true;
    bool column_reorder = true;
    double scale_min = 0.8;
    double scale_max = 1.2;
    std::uint64_t seed = 0;

    /// Every step disabled; augment() returns its input.
    static AugConfig none();
    /// Throws std::invalid_argument on rates outside [0,1] or bad scale bounds.
    void validate() const;
};

using AugRng = std::mt19937_64;

/// Document plus the line id of each token in the original geometry.
/// Tags are re-encoded against these lines, so noise cannot turn an I into
/// an IB.
struct AugState {
    Document doc;
    std::vector<int> line_of;

    static AugState from(const Document& doc);
    LineAssignment lines() const;
};

void spatial_noise(AugState& s, double sigma, AugRng& rng);
/// Replaces round(rate * n) distinct token texts with <mask>; boxes and
/// tags are kept.
void mask_tokens(AugState& s, double rate, AugRng& rng);
/// Drops each token with probability p and re-encodes every head from the
/// surviving members of each segment. Returns false if nothing survives.
bool drop_tokens(AugState& s, double p, AugRng& rng);
/// Randomizes the digits of numeric tokens, keeping length and punctuation.
void substitute_numbers(AugState& s, AugRng& rng);
/// Moves table columns so that column `order[k]` occupies the k-th slot
/// from the left, keeping the original gaps, and relabels column tags to
/// the new order. Tables wider than 10 columns are left alone because
/// moving a multi-line cell next to its wrap partner would make the column
/// tags ambiguous. Returns false when nothing was moved.
bool reorder_columns(AugState& s, std::span<const int> order);
/// Number of columns of the gold table (0 when the document has none).
int table_columns(const Document& doc);
/// Multiplies every coordinate by `factor`, rounds and clamps.
void scale_document(AugState& s, double factor);

/// Full pipeline: noise, mask, dropout, numeric substitution, column
/// reorder, scaling.
Document augment(const Document& doc, const AugConfig& cfg, AugRng& rng);

bool is_numeric_token(std::string_view text);

}  // namespace tabtag
