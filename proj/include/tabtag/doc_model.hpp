#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabtag {

inline constexpr int kCoordMax = 1000;
inline constexpr int kNumBuckets = kCoordMax + 1;
inline constexpr int kNumColumnTags = 10;

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Token box in normalized page coordinates, each value in [0, 1000].
struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int width() const { return x_max - x_min; }
    int height() const { return y_max - y_min; }
    bool valid() const;

    bool operator==(const BBox&) const = default;
};

enum class Head : std::uint8_t { label = 0, column = 1, row = 2 };
inline constexpr std::array<Head, 3> kAllHeads{Head::label, Head::column, Head::row};
std::string_view head_name(Head head);

enum class TagPrefix : std::uint8_t { O = 0, B = 1, I = 2, IB = 3 };

/// Closed tag set of one head: O followed by B/I/IB triples per body.
///
/// Index layout is 0 for O and 1 + 3*body + {0,1,2} for B/I/IB, so the
/// column set reads O, B-col_0, I-col_0, IB-col_0, B-col_1, ...
class TagVocabulary {
public:
    TagVocabulary(Head head, std::vector<std::string> bodies);

    static TagVocabulary labels(std::vector<std::string> label_set);
    static TagVocabulary columns();
    static TagVocabulary rows();

    Head head() const { return head_; }
    int size() const { return 1 + 3 * static_cast<int>(bodies_.size()); }
    int num_bodies() const { return static_cast<int>(bodies_.size()); }
    const std::vector<std::string>& bodies() const { return bodies_; }
    const std::string& body_name(int body) const { return bodies_.at(static_cast<size_t>(body)); }
    std::optional<int> body_index(std::string_view body) const;

    std::optional<int> index(std::string_view tag) const;
    std::string name(int id) const;

    static int make(TagPrefix prefix, int body) {
        return prefix == TagPrefix::O ? 0 : 1 + 3 * body + (static_cast<int>(prefix) - 1);
    }
    static TagPrefix prefix(int id) {
        return id == 0 ? TagPrefix::O : static_cast<TagPrefix>(1 + (id - 1) % 3);
    }
    /// Body index of a non-O tag, -1 for O.
    static int body(int id) { return id == 0 ? -1 : (id - 1) / 3; }

private:
    Head head_;
    std::vector<std::string> bodies_;
};

std::vector<std::string> default_label_set();

/// The three vocabularies used together by a corpus and a model.
struct TagSchema {
    TagVocabulary label = TagVocabulary::labels(default_label_set());
    TagVocabulary column = TagVocabulary::columns();
    TagVocabulary row = TagVocabulary::rows();

    TagSchema() = default;
    explicit TagSchema(std::vector<std::string> label_set)
        : label(TagVocabulary::labels(std::move(label_set))) {}

    const TagVocabulary& vocab(Head head) const;
};

struct Token {
    std::string text;
    BBox bbox;
    std::optional<int> label_tag;
    std::optional<int> col_tag;
    std::optional<int> row_tag;

    const std::optional<int>& tag(Head head) const;
    std::optional<int>& tag(Head head);

    bool operator==(const Token&) const = default;
};

struct Document {
    std::string id;
    std::array<int, 2> page_size{kCoordMax, kCoordMax};
    std::vector<Token> tokens;

    size_t size() const { return tokens.size(); }
    bool has_head(Head head) const;

    bool operator==(const Document&) const = default;
};

/// Column index k of B-col_k / I-col_k / IB-col_k; nullopt for O.
std::optional<int> column_tag_index(int col_tag);
std::optional<int> column_tag_index(std::string_view tag);

/// Parse one JSON document. `line` is used only in error messages.
Document parse_document(std::string_view json_text, const TagSchema& schema, size_t line = 1);
std::string serialize_document(const Document& doc, const TagSchema& schema);

std::vector<Document> load_corpus(const std::filesystem::path& path, const TagSchema& schema = {});
void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path,
                 const TagSchema& schema = {});

}  // namespace tabtag
