#include "tabtag/table.hpp"

#include <algorithm>

#include "json.hpp"

namespace tabtag {

int ExtractedTable::num_columns() const {
    int n = static_cast<int>(header.size());
    for (const auto& row : rows) {
        for (const auto& c : row) n = std::max(n, c.col + 1);
    }
    return n;
}

TagSequences gold_tags(const Document& doc) {
    TagSequences t;
    for (const auto& tok : doc.tokens) {
        t.label.push_back(tok.label_tag.value_or(0));
        t.column.push_back(tok.col_tag.value_or(0));
        t.row.push_back(tok.row_tag.value_or(0));
    }
    return t;
}

namespace {

constexpr int kHeaderGroup = -1;
constexpr int kNoGroup = -2;

int tag_at(const std::vector<int>& tags, size_t i) { return i < tags.size() ? tags[i] : 0; }

std::string join_texts(const Document& doc, const std::vector<int>& idx) {
    std::string out;
    for (const int i : idx) {
        if (!out.empty()) out += ' ';
        out += doc.tokens[static_cast<size_t>(i)].text;
    }
    return out;
}

}  // namespace

ExtractedTable reconstruct(const Document& doc, const TagSequences& tags, const TagSchema& schema) {
    ExtractedTable table;
    const size_t n = doc.tokens.size();
    const auto lines = assign_lines(doc);
    const int header_body = *schema.row.body_index("header_row");

    // Row membership from row-head segments.
    std::vector<int> group(n, kNoGroup);
    int num_rows = 0;
    {
        std::vector<int> row_tags(n);
        for (size_t i = 0; i < n; ++i) row_tags[i] = tag_at(tags.row, i);
        for (const auto& seg : decode_tags(row_tags, Head::row, lines)) {
            const int g = seg.body == header_body ? kHeaderGroup : num_rows++;
            for (const int t : seg.token_indices) group[static_cast<size_t>(t)] = g;
        }
    }
    table.rows.resize(static_cast<size_t>(num_rows));

    // Tokens of each group that carry a column tag, unwrapped left to right.
    std::map<int, std::vector<int>> members;
    for (size_t i = 0; i < n; ++i) {
        const int col = tag_at(tags.column, i);
        if (group[i] == kNoGroup) {
            if (col > 0) table.ignored_tokens.push_back(static_cast<int>(i));
            continue;
        }
        if (col == 0) {
            table.ignored_tokens.push_back(static_cast<int>(i));
            continue;
        }
        members[group[i]].push_back(static_cast<int>(i));
    }
    for (auto& [g, toks] : members) {
        std::vector<int> by_x = toks;
        std::stable_sort(by_x.begin(), by_x.end(), [&](int a, int b) {
            return doc.tokens[static_cast<size_t>(a)].bbox.x_min < doc.tokens[static_cast<size_t>(b)].bbox.x_min;
        });
        std::map<int, std::vector<int>> cells;  // effective column -> tokens
        int wraps = 0;
        int prev = -1;
        for (const int t : by_x) {
            const int raw = *column_tag_index(tag_at(tags.column, static_cast<size_t>(t)));
            if (raw < prev) ++wraps;
            prev = raw;
            cells[raw + kNumColumnTags * wraps].push_back(t);
        }
        for (auto& [col, idx] : cells) std::sort(idx.begin(), idx.end());

        if (g == kHeaderGroup) {
            table.header.resize(static_cast<size_t>(cells.rbegin()->first + 1));
            for (const auto& [col, idx] : cells) {
                auto& hc = table.header[static_cast<size_t>(col)];
                hc.text = join_texts(doc, idx);
                hc.provenance = idx;
                std::vector<int> votes(static_cast<size_t>(schema.label.num_bodies()), 0);
                for (const int t : idx) {
                    const int body = TagVocabulary::body(tag_at(tags.label, static_cast<size_t>(t)));
                    if (body >= 0 && body < schema.label.num_bodies()) ++votes[static_cast<size_t>(body)];
                }
                const auto best = std::max_element(votes.begin(), votes.end());
                if (best != votes.end() && *best > 0) {
                    hc.label = schema.label.body_name(static_cast<int>(best - votes.begin()));
                }
            }
        } else {
            auto& row = table.rows[static_cast<size_t>(g)];
            for (const auto& [col, idx] : cells) row.push_back(Cell{col, join_texts(doc, idx), idx});
        }
    }

    // Label segments outside the table become key-value pairs.
    std::vector<int> label_tags(n);
    for (size_t i = 0; i < n; ++i) label_tags[i] = tag_at(tags.label, i);
    for (const auto& seg : decode_tags(label_tags, Head::label, lines)) {
        if (seg.body >= schema.label.num_bodies()) continue;
        std::vector<int> outside;
        for (const int t : seg.token_indices) {
            if (tag_at(tags.row, static_cast<size_t>(t)) == 0) outside.push_back(t);
        }
        if (outside.empty()) continue;
        const auto& key = schema.label.body_name(seg.body);
        if (table.key_values.contains(key)) continue;
        table.key_values[key] = join_texts(doc, outside);
        table.kv_provenance[key] = outside;
    }
    return table;
}

std::string export_json(const ExtractedTable& table) {
    nlohmann::ordered_json j;
    auto header = nlohmann::ordered_json::array();
    for (const auto& h : table.header) {
        nlohmann::ordered_json jh;
        jh["text"] = h.text;
        if (h.label) jh["label"] = *h.label;
        header.push_back(std::move(jh));
    }
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : table.rows) {
        auto jr = nlohmann::ordered_json::array();
        for (const auto& c : row) {
            nlohmann::ordered_json jc;
            jc["col"] = c.col;
            jc["text"] = c.text;
            jr.push_back(std::move(jc));
        }
        rows.push_back(std::move(jr));
    }
    j["header"] = std::move(header);
    j["rows"] = std::move(rows);
    j["key_values"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : table.key_values) j["key_values"][k] = v;
    return j.dump();
}

ExtractedTable parse_table_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    ExtractedTable t;
    for (const auto& jh : j.at("header")) {
        HeaderCell h;
        h.text = jh.at("text").get<std::string>();
        if (jh.contains("label")) h.label = jh.at("label").get<std::string>();
        t.header.push_back(std::move(h));
    }
    for (const auto& jr : j.at("rows")) {
        std::vector<Cell> row;
        for (const auto& jc : jr) row.push_back(Cell{jc.at("col").get<int>(), jc.at("text").get<std::string>(), {}});
        t.rows.push_back(std::move(row));
    }
    for (const auto& [k, v] : j.at("key_values").items()) t.key_values[k] = v.get<std::string>();
    return t;
}

std::string csv_field(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string export_csv(const ExtractedTable& table) {
    const int width = table.num_columns();
    std::string out;
    for (int c = 0; c < width; ++c) {
        if (c > 0) out += ',';
        if (c < static_cast<int>(table.header.size())) out += csv_field(table.header[static_cast<size_t>(c)].text);
    }
    out += "\r\n";
    for (const auto& row : table.rows) {
        std::vector<std::string> cells(static_cast<size_t>(width));
        for (const auto& c : row) cells[static_cast<size_t>(c.col)] = c.text;
        for (int c = 0; c < width; ++c) {
            if (c > 0) out += ',';
            out += csv_field(cells[static_cast<size_t>(c)]);
        }
        out += "\r\n";
    }
    return out;
}

std::string export_kv_json(const ExtractedTable& table) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : table.key_values) j[k] = v;
    return j.dump();
}

std::string export_table(const ExtractedTable& table, ExportFormat format) {
    return format == ExportFormat::json ? export_json(table) : export_csv(table);
}

}  // namespace tabtag
