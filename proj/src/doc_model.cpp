#include "tabtag/doc_model.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tabtag {

namespace {

constexpr int kClampSlack = 10;
constexpr std::array<std::string_view, 3> kPrefixNames{"B", "I", "IB"};

std::string at_line(size_t line) { return " at line " + std::to_string(line); }

int read_coord(const nlohmann::json& v, size_t line) {
    if (!v.is_number_integer()) {
        throw CorpusError("bbox coordinate is not an integer" + at_line(line));
    }
    const auto c = v.get<long long>();
    if (c < 0 || c > kCoordMax + kClampSlack) {
        throw CorpusError("bbox coordinate " + std::to_string(c) + " out of range" + at_line(line));
    }
    return c > kCoordMax ? kCoordMax : static_cast<int>(c);
}

}  // namespace

bool BBox::valid() const {
    return 0 <= x_min && x_min <= x_max && x_max <= kCoordMax && 0 <= y_min && y_min <= y_max &&
           y_max <= kCoordMax;
}

std::string_view head_name(Head head) {
    switch (head) {
        case Head::label: return "label";
        case Head::column: return "column";
        case Head::row: return "row";
    }
    return "?";
}

TagVocabulary::TagVocabulary(Head head, std::vector<std::string> bodies)
    : head_(head), bodies_(std::move(bodies)) {}

TagVocabulary TagVocabulary::labels(std::vector<std::string> label_set) {
    return TagVocabulary(Head::label, std::move(label_set));
}

TagVocabulary TagVocabulary::columns() {
    std::vector<std::string> bodies;
    for (int k = 0; k < kNumColumnTags; ++k) {
        bodies.push_back("col_" + std::to_string(k));
    }
    return TagVocabulary(Head::column, std::move(bodies));
}

TagVocabulary TagVocabulary::rows() { return TagVocabulary(Head::row, {"row", "header_row"}); }

std::optional<int> TagVocabulary::body_index(std::string_view body) const {
    for (size_t i = 0; i < bodies_.size(); ++i) {
        if (bodies_[i] == body) {
            return static_cast<int>(i);
        }
    }
    return std::nullopt;
}

std::optional<int> TagVocabulary::index(std::string_view tag) const {
    if (tag == "O") {
        return 0;
    }
    const auto dash = tag.find('-');
    if (dash == std::string_view::npos) {
        return std::nullopt;
    }
    const auto prefix = tag.substr(0, dash);
    const auto body = body_index(tag.substr(dash + 1));
    if (!body) {
        return std::nullopt;
    }
    for (size_t p = 0; p < kPrefixNames.size(); ++p) {
        if (prefix == kPrefixNames[p]) {
            return make(static_cast<TagPrefix>(p + 1), *body);
        }
    }
    return std::nullopt;
}

std::string TagVocabulary::name(int id) const {
    if (id < 0 || id >= size()) {
        throw std::out_of_range("tag id " + std::to_string(id) + " outside " +
                                std::string(head_name(head_)) + " vocabulary");
    }
    if (id == 0) {
        return "O";
    }
    return std::string(kPrefixNames[static_cast<size_t>(prefix(id)) - 1]) + "-" + bodies_[static_cast<size_t>(body(id))];
}

std::vector<std::string> default_label_set() {
    return {"PO_NUMBER", "PO_DATE", "VENDOR_NAME", "ITEM_DESCRIPTION", "QUANTITY", "BASE_COST", "MRP"};
}

const TagVocabulary& TagSchema::vocab(Head head) const {
    switch (head) {
        case Head::label: return label;
        case Head::column: return column;
        case Head::row: return row;
    }
    return label;
}

const std::optional<int>& Token::tag(Head head) const {
    switch (head) {
        case Head::label: return label_tag;
        case Head::column: return col_tag;
        case Head::row: return row_tag;
    }
    return label_tag;
}

std::optional<int>& Token::tag(Head head) {
    return const_cast<std::optional<int>&>(std::as_const(*this).tag(head));
}

bool Document::has_head(Head head) const {
    if (tokens.empty()) {
        return false;
    }
    for (const auto& t : tokens) {
        if (!t.tag(head)) {
            return false;
        }
    }
    return true;
}

std::optional<int> column_tag_index(int col_tag) {
    if (col_tag <= 0) {
        return std::nullopt;
    }
    return TagVocabulary::body(col_tag);
}

std::optional<int> column_tag_index(std::string_view tag) {
    static const TagVocabulary columns = TagVocabulary::columns();
    const auto id = columns.index(tag);
    return id ? column_tag_index(*id) : std::nullopt;
}

Document parse_document(std::string_view json_text, const TagSchema& schema, size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError("malformed JSON" + at_line(line) + ": " + e.what());
    }
    if (!j.is_object()) {
        throw CorpusError("document is not a JSON object" + at_line(line));
    }
    Document doc;
    try {
        doc.id = j.at("id").get<std::string>();
        if (j.contains("page_size")) {
            const auto& ps = j.at("page_size");
            if (!ps.is_array() || ps.size() != 2) {
                throw CorpusError("page_size must be [width, height]" + at_line(line));
            }
            doc.page_size = {ps[0].get<int>(), ps[1].get<int>()};
        }
        for (const auto& jt : j.at("tokens")) {
            Token t;
            t.text = jt.at("text").get<std::string>();
            const auto& b = jt.at("bbox");
            if (!b.is_array() || b.size() != 4) {
                throw CorpusError("bbox must have 4 coordinates" + at_line(line));
            }
            t.bbox = {read_coord(b[0], line), read_coord(b[1], line), read_coord(b[2], line),
                      read_coord(b[3], line)};
            if (t.bbox.x_max < t.bbox.x_min) {
                throw CorpusError("x_max < x_min" + at_line(line));
            }
            if (t.bbox.y_max < t.bbox.y_min) {
                throw CorpusError("y_max < y_min" + at_line(line));
            }
            constexpr std::array<std::pair<const char*, Head>, 3> fields{
                {{"label_tag", Head::label}, {"col_tag", Head::column}, {"row_tag", Head::row}}};
            for (const auto& [field, head] : fields) {
                if (!jt.contains(field)) {
                    continue;
                }
                const auto s = jt.at(field).get<std::string>();
                const auto id = schema.vocab(head).index(s);
                if (!id) {
                    throw CorpusError("unknown " + std::string(head_name(head)) + " tag '" + s + "'" +
                                      at_line(line));
                }
                t.tag(head) = *id;
            }
            doc.tokens.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorpusError("schema violation" + at_line(line) + ": " + e.what());
    }
    return doc;
}

std::string serialize_document(const Document& doc, const TagSchema& schema) {
    nlohmann::ordered_json j;
    j["id"] = doc.id;
    j["page_size"] = {doc.page_size[0], doc.page_size[1]};
    auto tokens = nlohmann::ordered_json::array();
    for (const auto& t : doc.tokens) {
        nlohmann::ordered_json jt;
        jt["text"] = t.text;
        jt["bbox"] = {t.bbox.x_min, t.bbox.y_min, t.bbox.x_max, t.bbox.y_max};
        if (t.label_tag) jt["label_tag"] = schema.label.name(*t.label_tag);
        if (t.col_tag) jt["col_tag"] = schema.column.name(*t.col_tag);
        if (t.row_tag) jt["row_tag"] = schema.row.name(*t.row_tag);
        tokens.push_back(std::move(jt));
    }
    j["tokens"] = std::move(tokens);
    return j.dump();
}

std::vector<Document> load_corpus(const std::filesystem::path& path, const TagSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw CorpusError("cannot open corpus " + path.string());
    }
    std::vector<Document> docs;
    std::string text;
    size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        docs.push_back(parse_document(text, schema, line));
    }
    return docs;
}

void save_corpus(const std::vector<Document>& docs, const std::filesystem::path& path,
                 const TagSchema& schema) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CorpusError("cannot write corpus " + path.string());
    }
    for (const auto& d : docs) {
        out << serialize_document(d, schema) << '\n';
    }
    if (!out) {
        throw CorpusError("write failed for " + path.string());
    }
}

}  // namespace tabtag
