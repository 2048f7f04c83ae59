#include "tabtag/tagging.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>

namespace tabtag {

namespace {

struct DisjointSet {
    std::vector<int> parent;
    explicit DisjointSet(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[static_cast<size_t>(x)] != x) {
            auto& p = parent[static_cast<size_t>(x)];
            p = parent[static_cast<size_t>(p)];
            x = p;
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    }
};

bool center_within(const BBox& flat, const BBox& other) {
    // Compare doubled coordinates to stay in integers.
    const int c2 = flat.y_min + flat.y_max;
    return 2 * other.y_min <= c2 && c2 <= 2 * other.y_max;
}

}  // namespace

bool boxes_share_line(const BBox& a, const BBox& b) {
    const int min_h = std::min(a.height(), b.height());
    if (min_h == 0) {
        return a.height() == 0 ? center_within(a, b) : center_within(b, a);
    }
    const int overlap = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    return 2 * overlap >= min_h;
}

LineAssignment assign_lines(std::span<const BBox> boxes) {
    const size_t n = boxes.size();
    DisjointSet sets(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (boxes_share_line(boxes[i], boxes[j])) {
                sets.unite(static_cast<int>(i), static_cast<int>(j));
            }
        }
    }
    // Order components by their topmost y_min, then leftmost x_min.
    struct Key {
        int y = kCoordMax + 1;
        int x = kCoordMax + 1;
        int root = 0;
    };
    std::unordered_map<int, Key> keys;
    for (size_t i = 0; i < n; ++i) {
        const int root = sets.find(static_cast<int>(i));
        auto [it, inserted] = keys.try_emplace(root, Key{});
        auto& k = it->second;
        k.root = root;
        k.y = std::min(k.y, boxes[i].y_min);
        k.x = std::min(k.x, boxes[i].x_min);
    }
    std::vector<Key> ordered;
    ordered.reserve(keys.size());
    for (const auto& [root, key] : keys) ordered.push_back(key);
    std::sort(ordered.begin(), ordered.end(), [](const Key& a, const Key& b) {
        return std::tie(a.y, a.x, a.root) < std::tie(b.y, b.x, b.root);
    });
    std::unordered_map<int, int> line_of_root;
    for (size_t i = 0; i < ordered.size(); ++i) {
        line_of_root[ordered[i].root] = static_cast<int>(i);
    }
    LineAssignment out;
    out.num_lines = static_cast<int>(ordered.size());
    out.line_of.resize(n);
    for (size_t i = 0; i < n; ++i) {
        out.line_of[i] = line_of_root[sets.find(static_cast<int>(i))];
    }
    return out;
}

LineAssignment assign_lines(const Document& doc) {
    std::vector<BBox> boxes;
    boxes.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens) boxes.push_back(t.bbox);
    return assign_lines(boxes);
}

std::vector<std::vector<int>> tokens_by_line(std::span<const BBox> boxes, const LineAssignment& lines) {
    std::vector<std::vector<int>> out(static_cast<size_t>(lines.num_lines));
    for (size_t i = 0; i < boxes.size(); ++i) {
        out[static_cast<size_t>(lines.line_of[i])].push_back(static_cast<int>(i));
    }
    for (auto& line : out) {
        std::stable_sort(line.begin(), line.end(),
                         [&](int a, int b) { return boxes[static_cast<size_t>(a)].x_min < boxes[static_cast<size_t>(b)].x_min; });
    }
    return out;
}

std::vector<int> encode_tags(size_t num_tokens, std::span<const Segment> segments,
                             const LineAssignment& lines) {
    std::vector<int> tags(num_tokens, 0);
    std::vector<bool> used(num_tokens, false);
    for (const auto& seg : segments) {
        if (seg.token_indices.empty()) {
            throw TaggingError("empty segment");
        }
        int prev = -1;
        for (const int idx : seg.token_indices) {
            if (idx < 0 || static_cast<size_t>(idx) >= num_tokens) {
                throw TaggingError("segment token index " + std::to_string(idx) + " out of range");
            }
            if (idx <= prev) {
                throw TaggingError("segment token indices must be strictly increasing");
            }
            if (used[static_cast<size_t>(idx)]) {
                throw TaggingError("overlapping segments at token " + std::to_string(idx));
            }
            used[static_cast<size_t>(idx)] = true;
            TagPrefix prefix = TagPrefix::B;
            if (prev >= 0) {
                prefix = lines.same_line(prev, idx) ? TagPrefix::I : TagPrefix::IB;
            }
            tags[static_cast<size_t>(idx)] = TagVocabulary::make(prefix, seg.body);
            prev = idx;
        }
    }
    return tags;
}

std::vector<Segment> decode_tags(std::span<const int> tags, Head head, const LineAssignment& /*lines*/) {
    std::vector<Segment> segments;
    std::unordered_map<int, size_t> open;  // body -> segment position
    for (size_t i = 0; i < tags.size(); ++i) {
        const int tag = tags[i];
        if (tag <= 0) {
            continue;
        }
        const int body = TagVocabulary::body(tag);
        const auto it = open.find(body);
        if (TagVocabulary::prefix(tag) != TagPrefix::B && it != open.end()) {
            segments[it->second].token_indices.push_back(static_cast<int>(i));
            continue;
        }
        open[body] = segments.size();
        segments.push_back(Segment{head, body, {static_cast<int>(i)}});
    }
    return segments;
}

std::vector<Segment> decode_head(const Document& doc, Head head, const LineAssignment& lines) {
    std::vector<int> tags(doc.tokens.size(), 0);
    for (size_t i = 0; i < doc.tokens.size(); ++i) {
        tags[i] = doc.tokens[i].tag(head).value_or(0);
    }
    return decode_tags(tags, head, lines);
}

void apply_tags(Document& doc, Head head, std::span<const Segment> segments, const LineAssignment& lines) {
    const auto tags = encode_tags(doc.tokens.size(), segments, lines);
    for (size_t i = 0; i < tags.size(); ++i) {
        doc.tokens[i].tag(head) = tags[i];
    }
}

}  // namespace tabtag
