#include "tabtag/metrics.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace tabtag {

// ---------------------------------------------------------------------------
// Token P/R/F1

void PrfCounter::add(std::span<const int> pred, std::span<const int> gold, std::span<const std::uint8_t> mask) {
    if (pred.size() != gold.size()) {
        throw std::invalid_argument("token_prf: prediction length " + std::to_string(pred.size()) +
                                    " != gold length " + std::to_string(gold.size()));
    }
    if (!mask.empty() && mask.size() != gold.size()) throw std::invalid_argument("token_prf: mask length mismatch");
    const int k = static_cast<int>(counts_.size());
    for (size_t i = 0; i < gold.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const int p = pred[i];
        const int g = gold[i];
        if (p < 0 || p >= k || g < 0 || g >= k) throw std::invalid_argument("token_prf: tag id out of range");
        if (p == g) {
            ++counts_[static_cast<size_t>(p)].tp;
        } else {
            ++counts_[static_cast<size_t>(p)].fp;
            ++counts_[static_cast<size_t>(g)].fn;
        }
    }
}

PrfReport PrfCounter::report() const {
    PrfReport r;
    r.classes = counts_;
    long total_support = 0;
    for (auto& c : r.classes) {
        c.precision = c.predicted() > 0 ? double(c.tp) / double(c.predicted()) : 0.0;
        c.recall = c.support() > 0 ? double(c.tp) / double(c.support()) : 0.0;
        c.f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
        if (c.support() == 0 && c.predicted() == 0) continue;
        ++r.classes_in_macro;
        r.macro_precision += c.precision;
        r.macro_recall += c.recall;
        r.macro_f1 += c.f1;
        total_support += c.support();
        r.weighted_precision += c.precision * double(c.support());
        r.weighted_recall += c.recall * double(c.support());
        r.weighted_f1 += c.f1 * double(c.support());
    }
    if (r.classes_in_macro > 0) {
        r.macro_precision /= r.classes_in_macro;
        r.macro_recall /= r.classes_in_macro;
        r.macro_f1 /= r.classes_in_macro;
    }
    if (total_support > 0) {
        r.weighted_precision /= double(total_support);
        r.weighted_recall /= double(total_support);
        r.weighted_f1 /= double(total_support);
    }
    return r;
}

PrfReport token_prf(std::span<const int> pred, std::span<const int> gold, int num_classes,
                    std::span<const std::uint8_t> mask) {
    PrfCounter c(num_classes);
    c.add(pred, gold, mask);
    return c.report();
}

// ---------------------------------------------------------------------------
// Trees

int TableTree::add(std::string label, std::vector<int> children) {
    nodes.push_back(Node{std::move(label), std::move(children)});
    root = size() - 1;
    return root;
}

TableTree table_to_tree(const ExtractedTable& table) {
    TableTree t;
    std::vector<int> top;
    if (!table.header.empty()) {
        std::vector<int> leaves;
        for (const auto& h : table.header) leaves.push_back(t.add(h.text));
        top.push_back(t.add("header_row", std::move(leaves)));
    }
    for (const auto& row : table.rows) {
        std::vector<int> leaves;
        for (const auto& c : row) leaves.push_back(t.add(c.text));
        top.push_back(t.add("row", std::move(leaves)));
    }
    t.add("table", std::move(top));
    return t;
}

namespace {

// Postorder view used by Zhang-Shasha: 1-based labels and leftmost leaves.
struct Postorder {
    std::vector<const std::string*> label{nullptr};
    std::vector<int> lml{0};
    std::vector<int> keyroots;

    explicit Postorder(const TableTree& t) {
        if (t.root >= 0) walk(t, t.root);
        const int n = static_cast<int>(label.size()) - 1;
        std::vector<bool> seen(static_cast<size_t>(n) + 1, false);
        for (int i = n; i >= 1; --i) {
            if (!seen[static_cast<size_t>(lml[static_cast<size_t>(i)])]) {
                keyroots.push_back(i);
                seen[static_cast<size_t>(lml[static_cast<size_t>(i)])] = true;
            }
        }
        std::sort(keyroots.begin(), keyroots.end());
    }

    int walk(const TableTree& t, int node) {
        int leftmost = -1;
        for (const int c : t.nodes[static_cast<size_t>(node)].children) {
            const int first = walk(t, c);
            if (leftmost < 0) leftmost = first;
        }
        label.push_back(&t.nodes[static_cast<size_t>(node)].label);
        const int id = static_cast<int>(label.size()) - 1;
        lml.push_back(leftmost < 0 ? id : leftmost);
        return lml.back();
    }

    int size() const { return static_cast<int>(label.size()) - 1; }
};

}  // namespace

int tree_edit_distance(const TableTree& a, const TableTree& b) {
    const Postorder A(a);
    const Postorder B(b);
    const int n = A.size();
    const int m = B.size();
    if (n == 0 || m == 0) return n + m;

    std::vector<int> td(static_cast<size_t>((n + 1) * (m + 1)), 0);
    auto TD = [&](int i, int j) -> int& { return td[static_cast<size_t>(i * (m + 1) + j)]; };
    std::vector<int> fd(static_cast<size_t>((n + 2) * (m + 2)), 0);

    for (const int i : A.keyroots) {
        for (const int j : B.keyroots) {
            const int li = A.lml[static_cast<size_t>(i)];
            const int lj = B.lml[static_cast<size_t>(j)];
            const int rows = i - li + 2;
            const int cols = j - lj + 2;
            auto FD = [&](int x, int y) -> int& { return fd[static_cast<size_t>(x * cols + y)]; };
            FD(0, 0) = 0;
            for (int x = 1; x < rows; ++x) FD(x, 0) = FD(x - 1, 0) + 1;
            for (int y = 1; y < cols; ++y) FD(0, y) = FD(0, y - 1) + 1;
            for (int x = 1; x < rows; ++x) {
                const int ai = li + x - 1;
                for (int y = 1; y < cols; ++y) {
                    const int bj = lj + y - 1;
                    const int del = FD(x - 1, y) + 1;
                    const int ins = FD(x, y - 1) + 1;
                    if (A.lml[static_cast<size_t>(ai)] == li && B.lml[static_cast<size_t>(bj)] == lj) {
                        const int ren = *A.label[static_cast<size_t>(ai)] == *B.label[static_cast<size_t>(bj)] ? 0 : 1;
                        FD(x, y) = std::min({del, ins, FD(x - 1, y - 1) + ren});
                        TD(ai, bj) = FD(x, y);
                    } else {
                        const int px = A.lml[static_cast<size_t>(ai)] - li;
                        const int py = B.lml[static_cast<size_t>(bj)] - lj;
                        FD(x, y) = std::min({del, ins, FD(px, py) + TD(ai, bj)});
                    }
                }
            }
        }
    }
    return TD(n, m);
}

double teds(const TableTree& pred, const TableTree& gt) {
    const int denom = std::max(pred.size(), gt.size());
    if (denom == 0) return 1.0;
    // Ancestry-preserving mappings can cost more than max(|T1|, |T2|).
    return std::max(0.0, 1.0 - double(tree_edit_distance(pred, gt)) / double(denom));
}

// ---------------------------------------------------------------------------
// Key-values

int levenshtein(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1);
    std::vector<int> cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double levenshtein_similarity(const std::string& a, const std::string& b) {
    const size_t len = std::max(a.size(), b.size());
    if (len == 0) return 1.0;
    return 1.0 - double(levenshtein(a, b)) / double(len);
}

KvCounts& KvCounts::operator+=(const KvCounts& o) {
    gt_keys += o.gt_keys;
    pred_keys += o.pred_keys;
    matched_keys += o.matched_keys;
    exact_values += o.exact_values;
    similarity_sum += o.similarity_sum;
    return *this;
}

KvScore KvCounts::score() const {
    KvScore s;
    if (gt_keys == 0) {
        const double v = pred_keys == 0 ? 1.0 : 0.0;
        return KvScore{v, v, v, v};
    }
    s.field_accuracy = double(matched_keys) / double(gt_keys);
    s.exact_match = double(exact_values) / double(gt_keys);
    if (matched_keys > 0) {
        s.value_accuracy = double(exact_values) / double(matched_keys);
        s.levenshtein_similarity = similarity_sum / double(matched_keys);
    }
    return s;
}

KvCounts kv_counts(const std::map<std::string, std::string>& pred, const std::map<std::string, std::string>& gt) {
    KvCounts c;
    c.gt_keys = static_cast<long>(gt.size());
    c.pred_keys = static_cast<long>(pred.size());
    for (const auto& [k, v] : gt) {
        const auto it = pred.find(k);
        if (it == pred.end()) continue;
        ++c.matched_keys;
        if (it->second == v) ++c.exact_values;
        c.similarity_sum += levenshtein_similarity(it->second, v);
    }
    return c;
}

KvScore kv_metrics(const std::map<std::string, std::string>& pred, const std::map<std::string, std::string>& gt) {
    return kv_counts(pred, gt).score();
}

bool fully_correct(const ExtractedTable& pred, const ExtractedTable& gt) {
    if (pred.header.size() != gt.header.size() || pred.rows.size() != gt.rows.size()) return false;
    for (size_t i = 0; i < gt.header.size(); ++i) {
        if (pred.header[i].text != gt.header[i].text) return false;
    }
    for (size_t r = 0; r < gt.rows.size(); ++r) {
        const auto& a = pred.rows[r];
        const auto& b = gt.rows[r];
        if (a.size() != b.size()) return false;
        for (size_t c = 0; c < a.size(); ++c) {
            if (a[c].col != b[c].col || a[c].text != b[c].text) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Aggregation

MetricsAccumulator::MetricsAccumulator(int num_label_tags)
    : label_(num_label_tags), column_(kNumColumnClasses), row_(kNumRowClasses) {}

void MetricsAccumulator::add_tags(const TagSequences& pred, const TagSequences& gold) {
    if (!gold.label.empty()) label_.add(pred.label, gold.label);
    column_.add(pred.column, gold.column);
    row_.add(pred.row, gold.row);
}

void MetricsAccumulator::add_table(const ExtractedTable& pred, const ExtractedTable& gt) {
    teds_sum_ += teds(table_to_tree(pred), table_to_tree(gt));
    if (fully_correct(pred, gt)) ++fully_correct_;
    ++tables_;
    kv_ += kv_counts(pred.key_values, gt.key_values);
}

MetricsReport MetricsAccumulator::report() const {
    MetricsReport r;
    r.label = label_.report();
    r.column = column_.report();
    r.row = row_.report();
    r.documents = tables_;
    if (tables_ > 0) {
        r.teds_mean = teds_sum_ / tables_;
        r.fully_correct_rate = double(fully_correct_) / tables_;
    }
    r.kv = kv_.score();
    return r;
}

namespace {

nlohmann::ordered_json prf_json(const PrfReport& r, const TagVocabulary& vocab) {
    nlohmann::ordered_json j;
    j["macro_precision"] = r.macro_precision;
    j["macro_recall"] = r.macro_recall;
    j["macro_f1"] = r.macro_f1;
    j["weighted_precision"] = r.weighted_precision;
    j["weighted_recall"] = r.weighted_recall;
    j["weighted_f1"] = r.weighted_f1;
    auto classes = nlohmann::ordered_json::object();
    for (size_t c = 0; c < r.classes.size(); ++c) {
        const auto& s = r.classes[c];
        if (s.support() == 0 && s.predicted() == 0) continue;
        nlohmann::ordered_json jc;
        jc["precision"] = s.precision;
        jc["recall"] = s.recall;
        jc["f1"] = s.f1;
        jc["support"] = s.support();
        const int id = static_cast<int>(c);
        classes[id < vocab.size() ? vocab.name(id) : std::to_string(id)] = std::move(jc);
    }
    j["classes"] = std::move(classes);
    return j;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report, const TagSchema& schema) {
    nlohmann::ordered_json j;
    j["documents"] = report.documents;
    j["label"] = prf_json(report.label, schema.label);
    j["column"] = prf_json(report.column, schema.column);
    j["row"] = prf_json(report.row, schema.row);
    j["teds_mean"] = report.teds_mean;
    j["fully_correct_rate"] = report.fully_correct_rate;
    j["field_accuracy"] = report.kv.field_accuracy;
    j["value_accuracy"] = report.kv.value_accuracy;
    j["exact_match"] = report.kv.exact_match;
    j["levenshtein_similarity"] = report.kv.levenshtein_similarity;
    return j.dump(2);
}

}  // namespace tabtag
