#include "tabtag/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tabtag/table.hpp"

namespace tabtag {

AugConfig AugConfig::none() {
    AugConfig c;
    c.spatial_sigma = 0.0;
    c.mask_rate_max = 0.0;
    c.token_dropout_p = 0.0;
    c.numeric_substitution = false;
    c.column_reorder = false;
    c.scale_min = 1.0;
    c.scale_max = 1.0;
    return c;
}

void AugConfig::validate() const {
    auto rate = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
    };
    rate(mask_rate_max, "mask_rate_max");
    rate(token_dropout_p, "token_dropout_p");
    if (!(spatial_sigma >= 0.0)) throw std::invalid_argument("spatial_sigma must be >= 0");
    if (!(scale_min > 0.0 && scale_max >= scale_min)) {
        throw std::invalid_argument("scale_range must satisfy 0 < min <= max");
    }
}

AugState AugState::from(const Document& doc) {
    AugState s{doc, assign_lines(doc).line_of};
    return s;
}

LineAssignment AugState::lines() const {
    LineAssignment l;
    l.line_of = line_of;
    l.num_lines = line_of.empty() ? 0 : *std::max_element(line_of.begin(), line_of.end()) + 1;
    return l;
}

namespace {

int clamp_coord(long v) { return static_cast<int>(std::clamp<long>(v, 0, kCoordMax)); }

// Rebuilds the document from tokens `keep` (old indices, in new order) and
// re-encodes every head present from the old segments.
void rebuild(AugState& s, const std::vector<int>& keep, const std::vector<Segment>* column_segments = nullptr) {
    const auto old_lines = s.lines();
    std::vector<int> new_pos(s.doc.tokens.size(), -1);
    Document out;
    out.id = s.doc.id;
    out.page_size = s.doc.page_size;
    std::vector<int> line_of;
    for (const int i : keep) {
        new_pos[static_cast<size_t>(i)] = static_cast<int>(out.tokens.size());
        out.tokens.push_back(s.doc.tokens[static_cast<size_t>(i)]);
        line_of.push_back(s.line_of[static_cast<size_t>(i)]);
    }
    AugState next{std::move(out), std::move(line_of)};
    const auto new_lines = next.lines();
    for (const Head head : {Head::label, Head::column, Head::row}) {
        if (!s.doc.has_head(head)) continue;
        const auto segments = head == Head::column && column_segments ? *column_segments
                                                                      : decode_head(s.doc, head, old_lines);
        std::vector<Segment> mapped;
        for (const auto& seg : segments) {
            Segment m{head, seg.body, {}};
            for (const int t : seg.token_indices) {
                const int p = new_pos[static_cast<size_t>(t)];
                if (p >= 0) m.token_indices.push_back(p);
            }
            if (m.token_indices.empty()) continue;
            std::sort(m.token_indices.begin(), m.token_indices.end());
            mapped.push_back(std::move(m));
        }
        apply_tags(next.doc, head, mapped, new_lines);
    }
    s = std::move(next);
}

}  // namespace

void spatial_noise(AugState& s, double sigma, AugRng& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& t : s.doc.tokens) {
        auto& b = t.bbox;
        int c[4] = {b.x_min, b.y_min, b.x_max, b.y_max};
        for (auto& v : c) v = clamp_coord(std::lround(v + noise(rng)));
        b = BBox{std::min(c[0], c[2]), std::min(c[1], c[3]), std::max(c[0], c[2]), std::max(c[1], c[3])};
    }
}

void mask_tokens(AugState& s, double rate, AugRng& rng) {
    const size_t n = s.doc.tokens.size();
    const auto count = static_cast<size_t>(std::lround(rate * double(n)));
    if (count == 0) return;
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < std::min(count, n); ++i) {
        const size_t j = std::uniform_int_distribution<size_t>(i, n - 1)(rng);
        std::swap(idx[i], idx[j]);
        s.doc.tokens[idx[i]].text = "<mask>";
    }
}

bool drop_tokens(AugState& s, double p, AugRng& rng) {
    if (p <= 0.0) return true;
    std::bernoulli_distribution drop(p);
    std::vector<int> keep;
    for (size_t i = 0; i < s.doc.tokens.size(); ++i) {
        if (!drop(rng)) keep.push_back(static_cast<int>(i));
    }
    if (keep.empty()) return false;
    if (keep.size() == s.doc.tokens.size()) return true;
    rebuild(s, keep);
    return true;
}

bool is_numeric_token(std::string_view text) {
    bool digit = false;
    for (const char c : text) {
        if (c >= '0' && c <= '9') {
            digit = true;
        } else if (std::string_view(".,-/:$%").find(c) == std::string_view::npos) {
            return false;
        }
    }
    return digit;
}

void substitute_numbers(AugState& s, AugRng& rng) {
    std::uniform_int_distribution<int> any(0, 9);
    std::uniform_int_distribution<int> nonzero(1, 9);
    for (auto& t : s.doc.tokens) {
        if (!is_numeric_token(t.text)) continue;
        bool leading = true;
        for (auto& c : t.text) {
            if (c < '0' || c > '9') {
                leading = c != ',' && leading;
                continue;
            }
            // A nonzero leading digit stays nonzero so "0.50" and "150" keep their shape.
            c = static_cast<char>('0' + (leading && c != '0' ? nonzero(rng) : any(rng)));
            leading = false;
        }
    }
}

namespace {

struct ColumnGrid {
    ExtractedTable table;
    int columns = 0;
};

ColumnGrid gold_grid(const Document& doc) {
    ColumnGrid g;
    if (!doc.has_head(Head::column) || !doc.has_head(Head::row)) return g;
    g.table = reconstruct(doc, gold_tags(doc));
    g.columns = g.table.num_columns();
    return g;
}

}  // namespace

int table_columns(const Document& doc) { return gold_grid(doc).columns; }

bool reorder_columns(AugState& s, std::span<const int> order) {
    const auto grid = gold_grid(s.doc);
    const int m = grid.columns;
    if (m < 2 || m > kNumColumnTags) return false;
    if (static_cast<int>(order.size()) != m) {
        throw std::invalid_argument("column permutation has " + std::to_string(order.size()) + " entries, table has " +
                                    std::to_string(m) + " columns");
    }
    std::vector<int> slot(static_cast<size_t>(m), -1);
    for (int k = 0; k < m; ++k) {
        const int c = order[static_cast<size_t>(k)];
        if (c < 0 || c >= m || slot[static_cast<size_t>(c)] >= 0) throw std::invalid_argument("not a permutation");
        slot[static_cast<size_t>(c)] = k;
    }

    std::vector<std::vector<int>> members(static_cast<size_t>(m));
    std::vector<Segment> col_segments;
    auto add_cell = [&](int col, const std::vector<int>& prov) {
        auto& mem = members[static_cast<size_t>(col)];
        mem.insert(mem.end(), prov.begin(), prov.end());
        col_segments.push_back(Segment{Head::column, slot[static_cast<size_t>(col)] % kNumColumnTags, prov});
    };
    for (size_t j = 0; j < grid.table.header.size(); ++j) {
        if (!grid.table.header[j].provenance.empty()) add_cell(static_cast<int>(j), grid.table.header[j].provenance);
    }
    for (const auto& row : grid.table.rows) {
        for (const auto& c : row) add_cell(c.col, c.provenance);
    }

    std::vector<int> lo(static_cast<size_t>(m), kCoordMax);
    std::vector<int> hi(static_cast<size_t>(m), 0);
    for (int c = 0; c < m; ++c) {
        if (members[static_cast<size_t>(c)].empty()) return false;
        for (const int t : members[static_cast<size_t>(c)]) {
            const auto& b = s.doc.tokens[static_cast<size_t>(t)].bbox;
            lo[static_cast<size_t>(c)] = std::min(lo[static_cast<size_t>(c)], b.x_min);
            hi[static_cast<size_t>(c)] = std::max(hi[static_cast<size_t>(c)], b.x_max);
        }
    }
    std::vector<int> shift(static_cast<size_t>(m), 0);
    int x = lo[0];
    for (int k = 0; k < m; ++k) {
        const auto c = static_cast<size_t>(order[static_cast<size_t>(k)]);
        shift[c] = x - lo[c];
        x += hi[c] - lo[c];
        if (k + 1 < m) x += lo[static_cast<size_t>(k) + 1] - hi[static_cast<size_t>(k)];
    }
    for (int c = 0; c < m; ++c) {
        for (const int t : members[static_cast<size_t>(c)]) {
            auto& b = s.doc.tokens[static_cast<size_t>(t)].bbox;
            b.x_min = clamp_coord(long{b.x_min} + shift[static_cast<size_t>(c)]);
            b.x_max = clamp_coord(long{b.x_max} + shift[static_cast<size_t>(c)]);
        }
    }

    std::vector<int> keep(s.doc.tokens.size());
    std::iota(keep.begin(), keep.end(), 0);
    std::stable_sort(keep.begin(), keep.end(), [&](int a, int b) {
        const int la = s.line_of[static_cast<size_t>(a)];
        const int lb = s.line_of[static_cast<size_t>(b)];
        if (la != lb) return la < lb;
        return s.doc.tokens[static_cast<size_t>(a)].bbox.x_min < s.doc.tokens[static_cast<size_t>(b)].bbox.x_min;
    });
    rebuild(s, keep, &col_segments);
    return true;
}

void scale_document(AugState& s, double factor) {
    if (factor == 1.0) return;
    for (auto& t : s.doc.tokens) {
        auto& b = t.bbox;
        b.x_min = clamp_coord(std::lround(b.x_min * factor));
        b.y_min = clamp_coord(std::lround(b.y_min * factor));
        b.x_max = clamp_coord(std::lround(b.x_max * factor));
        b.y_max = clamp_coord(std::lround(b.y_max * factor));
    }
}

Document augment(const Document& doc, const AugConfig& cfg, AugRng& rng) {
    cfg.validate();
    if (doc.tokens.empty()) return doc;
    AugState s = AugState::from(doc);
    spatial_noise(s, cfg.spatial_sigma, rng);
    if (cfg.mask_rate_max > 0.0) {
        mask_tokens(s, std::uniform_real_distribution<double>(0.0, cfg.mask_rate_max)(rng), rng);
    }
    if (!drop_tokens(s, cfg.token_dropout_p, rng)) return doc;
    if (cfg.numeric_substitution) substitute_numbers(s, rng);
    if (cfg.column_reorder) {
        const int m = table_columns(s.doc);
        if (m >= 2 && m <= kNumColumnTags) {
            std::vector<int> order(static_cast<size_t>(m));
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            reorder_columns(s, order);
        }
    }
    if (cfg.scale_min != 1.0 || cfg.scale_max != 1.0) {
        scale_document(s, std::uniform_real_distribution<double>(cfg.scale_min, cfg.scale_max)(rng));
    }
    return s.doc;
}

}  // namespace tabtag
