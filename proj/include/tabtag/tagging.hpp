#pragma once

#include <span>
#include <vector>

#include "tabtag/doc_model.hpp"

namespace tabtag {

/// A decoded contiguous span of one head: tokens sharing a tag body.
struct Segment {
    Head head = Head::label;
    int body = 0;
    std::vector<int> token_indices;

    bool operator==(const Segment&) const = default;
};

/// Per-token line id from single-link clustering of vertical overlap.
struct LineAssignment {
    std::vector<int> line_of;
    int num_lines = 0;

    bool same_line(int a, int b) const {
        return line_of[static_cast<size_t>(a)] == line_of[static_cast<size_t>(b)];
    }
};

class TaggingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two boxes belong to the same line when their vertical overlap is at
/// least half the smaller height. A zero-height box joins a line when its
/// center lies within the other box's vertical extent.
bool boxes_share_line(const BBox& a, const BBox& b);

LineAssignment assign_lines(std::span<const BBox> boxes);
LineAssignment assign_lines(const Document& doc);

/// Token indices of each line, lines in id order, tokens sorted by x_min.
std::vector<std::vector<int>> tokens_by_line(std::span<const BBox> boxes, const LineAssignment& lines);

/// B for a segment's first token, I when a member shares its predecessor's
/// line, IB when it starts on a different line; O elsewhere.
std::vector<int> encode_tags(size_t num_tokens, std::span<const Segment> segments,
                             const LineAssignment& lines);

/// Tolerant decode. B opens a segment of its body. I/IB extend the open
/// segment of the same body, or open one when none exists. Never throws.
std::vector<Segment> decode_tags(std::span<const int> tags, Head head, const LineAssignment& lines);

/// Decode the gold tags of one head; tokens missing the head count as O.
std::vector<Segment> decode_head(const Document& doc, Head head, const LineAssignment& lines);

/// Writes encoded tags for `head` into the document's tokens.
void apply_tags(Document& doc, Head head, std::span<const Segment> segments, const LineAssignment& lines);

}  // namespace tabtag
