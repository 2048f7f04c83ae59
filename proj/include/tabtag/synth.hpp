#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tabtag/doc_model.hpp"
#include "tabtag/table.hpp"

namespace tabtag {

enum class GenKind { pretrain, finance };

GenKind parse_gen_kind(std::string_view name);
std::string gen_kind_name(GenKind kind);

struct GenProfile {
    GenKind kind = GenKind::finance;
    int min_columns = 2;
    int max_columns = 10;
    int min_rows = 1;
    int max_rows = 15;
    double multiline_cell_p = 0.2;
    /// Key-value fields placed above the table (finance only).
    std::vector<std::string> kv_fields = {"PO_NUMBER", "PO_DATE", "VENDOR_NAME"};
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on out-of-range fields.
    void validate() const;
};

/// Layout request that cannot fit on the page.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GeneratedDoc {
    Document doc;
    ExtractedTable truth;
};

/// Document `index` of the stream defined by `profile.seed`. Each index uses
/// its own derived seed, so documents can be produced independently.
GeneratedDoc generate_one(const GenProfile& profile, std::uint64_t index);
std::vector<GeneratedDoc> generate(const GenProfile& profile, int count);

/// Tags the document's tokens from the grid's provenance lists: one row
/// segment per header/item row, one column segment per cell (body
/// col_(j mod 10)), and when `labeled` a label segment per typed header
/// cell, per item cell under a typed header, and per key-value pair.
/// Throws GenerationError when a token belongs to two cells.
Document grid_to_tags(Document doc, const ExtractedTable& grid, bool labeled, const TagSchema& schema = {});

/// `<name>.jsonl` -> `<name>.gt.jsonl`.
std::filesystem::path ground_truth_path(const std::filesystem::path& corpus);

/// One JSON line per document: the table export plus an "id" member.
void save_ground_truth(const std::vector<GeneratedDoc>& docs, const std::filesystem::path& path);
std::vector<std::pair<std::string, ExtractedTable>> load_ground_truth(const std::filesystem::path& path);

}  // namespace tabtag
