#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabtag/doc_model.hpp"
#include "tabtag/tagging.hpp"

namespace tabtag {

struct HeaderCell {
    std::string text;
    std::optional<std::string> label;
    std::vector<int> provenance;

    bool operator==(const HeaderCell&) const = default;
};

struct Cell {
    int col = 0;
    std::string text;
    std::vector<int> provenance;

    bool operator==(const Cell&) const = default;
};

/// Structured output of one document: header indexed by effective column,
/// item rows in reading order with cells sorted by column, and key-value
/// pairs found outside the table.
struct ExtractedTable {
    std::vector<HeaderCell> header;
    std::vector<std::vector<Cell>> rows;
    std::map<std::string, std::string> key_values;
    std::map<std::string, std::vector<int>> kv_provenance;
    /// Tokens carrying a row or column tag that could not be placed in the
    /// grid. Diagnostic only; not part of equality.
    std::vector<int> ignored_tokens;

    bool empty() const { return header.empty() && rows.empty() && key_values.empty(); }
    int num_columns() const;

    bool operator==(const ExtractedTable& o) const {
        return header == o.header && rows == o.rows && key_values == o.key_values && kv_provenance == o.kv_provenance;
    }
};

/// Predicted tag ids per head, one per token.
struct TagSequences {
    std::vector<int> label;
    std::vector<int> column;
    std::vector<int> row;
};

TagSequences gold_tags(const Document& doc);

/// Merge tagged tokens into a table. Column indices are unwrapped per row:
/// visiting a row's tokens left to right, each drop in the raw col_k index
/// adds 10 to every following token's effective column.
ExtractedTable reconstruct(const Document& doc, const TagSequences& tags, const TagSchema& schema = {});

enum class ExportFormat { json, csv };

/// Canonical JSON: {"header":[{"text","label"?}],"rows":[[{"col","text"}]],"key_values":{}}.
std::string export_json(const ExtractedTable& table);
/// Header line then one line per row, RFC-4180 quoting, CRLF line ends.
std::string export_csv(const ExtractedTable& table);
/// Key-value side file written next to a CSV export.
std::string export_kv_json(const ExtractedTable& table);
std::string export_table(const ExtractedTable& table, ExportFormat format);

/// Parses the JSON export schema (provenance is not part of it).
ExtractedTable parse_table_json(const std::string& text);

/// RFC-4180 field quoting.
std::string csv_field(const std::string& field);

}  // namespace tabtag
