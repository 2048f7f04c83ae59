#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tabtag/encoder.hpp"
#include "tabtag/table.hpp"

namespace tabtag {

// ---------------------------------------------------------------------------
// Token-level precision / recall / F1

struct ClassScore {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;

    long support() const { return tp + fn; }
    long predicted() const { return tp + fp; }
};

struct PrfReport {
    std::vector<ClassScore> classes;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double weighted_precision = 0;
    double weighted_recall = 0;
    double weighted_f1 = 0;
    int classes_in_macro = 0;
};

/// Accumulates confusion counts over many documents.
class PrfCounter {
public:
    explicit PrfCounter(int num_classes) : counts_(static_cast<size_t>(num_classes)) {}

    /// Throws std::invalid_argument when the sequences differ in length.
    void add(std::span<const int> pred, std::span<const int> gold, std::span<const std::uint8_t> mask = {});
    PrfReport report() const;

private:
    std::vector<ClassScore> counts_;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R), each 0 on a zero
/// denominator. Macro averages skip classes absent from both prediction
/// and gold; weighted averages use gold support.
PrfReport token_prf(std::span<const int> pred, std::span<const int> gold, int num_classes,
                    std::span<const std::uint8_t> mask = {});

// ---------------------------------------------------------------------------
// Tree edit distance

/// Ordered labeled tree stored in postorder.
struct TableTree {
    struct Node {
        std::string label;
        std::vector<int> children;
    };
    std::vector<Node> nodes;
    int root = -1;

    int size() const { return static_cast<int>(nodes.size()); }
    int add(std::string label, std::vector<int> children = {});
};

/// table -> [header_row] row* -> cell leaves labeled with their text.
TableTree table_to_tree(const ExtractedTable& table);

/// Unit-cost ordered tree edit distance (insert, delete, rename).
int tree_edit_distance(const TableTree& a, const TableTree& b);

/// 1 - distance / max(|a|, |b|), floored at 0.
double teds(const TableTree& pred, const TableTree& gt);

// ---------------------------------------------------------------------------
// Key-value and whole-table metrics

int levenshtein(const std::string& a, const std::string& b);
/// 1 - lev(a, b) / max(|a|, |b|); 1 for two empty strings.
double levenshtein_similarity(const std::string& a, const std::string& b);

struct KvScore {
    double field_accuracy = 0;
    double value_accuracy = 0;
    double exact_match = 0;
    double levenshtein_similarity = 0;
};

/// Raw counts, so corpus-level scores pool over documents.
struct KvCounts {
    long gt_keys = 0;
    long pred_keys = 0;
    long matched_keys = 0;
    long exact_values = 0;
    double similarity_sum = 0;

    KvCounts& operator+=(const KvCounts& o);
    KvScore score() const;
};

KvCounts kv_counts(const std::map<std::string, std::string>& pred, const std::map<std::string, std::string>& gt);
KvScore kv_metrics(const std::map<std::string, std::string>& pred, const std::map<std::string, std::string>& gt);

/// Header texts, grid shape and every cell text match exactly.
bool fully_correct(const ExtractedTable& pred, const ExtractedTable& gt);

struct MetricsReport {
    PrfReport label;
    PrfReport column;
    PrfReport row;
    double teds_mean = 0;
    double fully_correct_rate = 0;
    KvScore kv;
    int documents = 0;
};

/// Corpus-level aggregation.
class MetricsAccumulator {
public:
    explicit MetricsAccumulator(int num_label_tags);

    void add_tags(const TagSequences& pred, const TagSequences& gold);
    void add_table(const ExtractedTable& pred, const ExtractedTable& gt);
    MetricsReport report() const;

private:
    PrfCounter label_;
    PrfCounter column_;
    PrfCounter row_;
    double teds_sum_ = 0;
    int fully_correct_ = 0;
    int tables_ = 0;
    KvCounts kv_;
};

std::string metrics_to_json(const MetricsReport& report, const TagSchema& schema = {});

}  // namespace tabtag
