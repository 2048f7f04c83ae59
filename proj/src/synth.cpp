#include "tabtag/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"
#include "tabtag/tagging.hpp"

namespace tabtag {

GenKind parse_gen_kind(std::string_view name) {
    if (name == "pretrain") return GenKind::pretrain;
    if (name == "finance") return GenKind::finance;
    throw std::invalid_argument("unknown profile '" + std::string(name) + "' (expected pretrain or finance)");
}

std::string gen_kind_name(GenKind kind) { return kind == GenKind::pretrain ? "pretrain" : "finance"; }

void GenProfile::validate() const {
    if (min_columns < 1 || max_columns < min_columns) {
        throw std::invalid_argument("column range must satisfy 1 <= min <= max");
    }
    if (min_rows < 1 || max_rows < min_rows) throw std::invalid_argument("row range must satisfy 1 <= min <= max");
    if (!(multiline_cell_p >= 0.0 && multiline_cell_p <= 1.0)) {
        throw std::invalid_argument("multiline_cell_p must be in [0, 1]");
    }
}

namespace {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
bool chance(Rng& rng, double p) { return uniform01(rng) < p; }

template <typename C>
const auto& pick(Rng& rng, const C& items) {
    return items[static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(items.size()) - 1))];
}

using Words = std::vector<std::string>;

Words split_words(std::string_view s) {
    Words out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string group_thousands(long v) {
    std::string digits = std::to_string(v);
    std::string out;
    const int n = static_cast<int>(digits.size());
    for (int i = 0; i < n; ++i) {
        if (i > 0 && (n - i) % 3 == 0) out += ',';
        out += digits[static_cast<size_t>(i)];
    }
    return out;
}

std::string money(long cents) {
    char frac[4];
    std::snprintf(frac, sizeof frac, "%02ld", cents % 100);
    return group_thousands(cents / 100) + "." + frac;
}

const std::vector<std::string_view> kProductWords = {
    "Steel", "Bolt", "Hex", "Nut", "Washer", "Copper", "Wire", "Cable", "PVC", "Pipe", "Elbow", "Valve",
    "Brass", "Fitting", "Paint", "White", "Primer", "Cement", "Bag", "Sand", "Glue", "Tape", "Insulation",
    "Switch", "Socket", "LED", "Bulb", "Panel", "Frame", "Hinge", "Lock", "Handle", "Drill", "Bit", "Screw",
    "Anchor", "Bracket", "Clamp", "Hose", "Filter", "Pump", "Motor", "Belt", "Bearing", "Gasket", "Seal",
    "Spring", "Chain", "Gloves", "Helmet", "Mask", "Paper", "A4", "Ream", "Toner", "Cartridge", "Marker",
    "Folder", "Stapler", "Ink", "Blue", "Black", "Heavy", "Duty", "Small", "Large", "Medium", "Pack", "Set",
    "Kit", "Roll", "Box", "Coated", "Galvanized", "Stainless", "Plastic", "Rubber", "Aluminium", "Oil", "Grease"};

const std::vector<std::string_view> kCompanyWords = {
    "Acme", "Global", "Sunrise", "Apex", "Vertex", "Bharat", "Pioneer", "Summit", "Metro", "Eastern",
    "Western", "United", "Prime", "Star", "Royal", "Delta", "Omega", "Crystal", "Evergreen", "Silverline"};
const std::vector<std::string_view> kCompanyKinds = {"Industrial", "Traders", "Supplies", "Enterprises",
                                                     "Hardware",   "Distributors", "Agencies", "Engineering"};
const std::vector<std::string_view> kCompanySuffix = {"Ltd", "Pvt Ltd", "Inc", "Co", "LLP", "Corp"};
const std::vector<std::string_view> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                               "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

enum class ColKind { serial, code, description, hsn, uom, quantity, base_cost, mrp, tax, discount, amount, batch, expiry };

struct ColumnSpec {
    ColKind kind;
    const char* label;  // semantic type, or nullptr
    std::vector<std::string_view> headers;
    bool right_align;
    bool may_be_empty;
};

const std::vector<ColumnSpec>& column_specs() {
    static const std::vector<ColumnSpec> specs = {
        {ColKind::serial, nullptr, {"S.No", "Sr. No.", "#", "Sl No", "Line"}, false, false},
        {ColKind::code, nullptr, {"Item Code", "SKU", "Code", "Part No"}, false, true},
        {ColKind::description, "ITEM_DESCRIPTION", {"Description", "Item Description", "Particulars", "Product", "Item"}, false, false},
        {ColKind::hsn, nullptr, {"HSN", "HSN Code", "HSN/SAC"}, false, true},
        {ColKind::uom, nullptr, {"UOM", "Unit", "Units"}, false, false},
        {ColKind::quantity, "QUANTITY", {"Qty", "Quantity", "Qty."}, true, false},
        {ColKind::base_cost, "BASE_COST", {"Rate", "Unit Price", "Base Cost", "Price", "Unit Cost"}, true, false},
        {ColKind::mrp, "MRP", {"MRP", "M.R.P.", "List Price"}, true, false},
        {ColKind::tax, nullptr, {"Tax %", "GST %", "VAT"}, true, false},
        {ColKind::discount, nullptr, {"Disc.", "Discount", "Disc %"}, true, true},
        {ColKind::amount, nullptr, {"Amount", "Total", "Net Amount", "Line Total"}, true, false},
        {ColKind::batch, nullptr, {"Batch", "Lot No", "Batch No"}, false, true},
        {ColKind::expiry, nullptr, {"Expiry", "Exp. Date", "Best Before"}, false, true},
    };
    return specs;
}

std::string random_code(Rng& rng, int letters, int digits) {
    std::string s;
    for (int i = 0; i < letters; ++i) s += static_cast<char>('A' + uniform_int(rng, 0, 25));
    if (letters > 0 && chance(rng, 0.5)) s += '-';
    for (int i = 0; i < digits; ++i) s += static_cast<char>('0' + uniform_int(rng, 0, 9));
    return s;
}

Words product_words(Rng& rng, int n) {
    Words w;
    for (int i = 0; i < n; ++i) w.emplace_back(pick(rng, kProductWords));
    return w;
}

// Cell content as lines of words.
using Block = std::vector<Words>;

Block cell_content(Rng& rng, ColKind kind, int row, bool allow_multiline, double multiline_p) {
    switch (kind) {
        case ColKind::serial: return {{std::to_string(row + 1)}};
        case ColKind::code: return {{random_code(rng, uniform_int(rng, 1, 3), uniform_int(rng, 3, 5))}};
        case ColKind::description: {
            if (allow_multiline && chance(rng, multiline_p)) {
                auto words = product_words(rng, uniform_int(rng, 3, 6));
                const size_t cut = (words.size() + 1) / 2;
                return {Words(words.begin(), words.begin() + static_cast<long>(cut)),
                        Words(words.begin() + static_cast<long>(cut), words.end())};
            }
            return {product_words(rng, uniform_int(rng, 1, 3))};
        }
        case ColKind::hsn: return {{random_code(rng, 0, chance(rng, 0.5) ? 8 : 6)}};
        case ColKind::uom: {
            static const std::vector<std::string_view> units = {"PCS", "KG", "BOX", "NOS", "LTR", "MTR", "SET"};
            return {{std::string(pick(rng, units))}};
        }
        case ColKind::quantity: {
            const int q = chance(rng, 0.15) ? uniform_int(rng, 1000, 25000) : uniform_int(rng, 1, 500);
            return {{group_thousands(q)}};
        }
        case ColKind::base_cost:
        case ColKind::mrp:
        case ColKind::amount: {
            const long cents = chance(rng, 0.2) ? uniform_int(rng, 100000, 50000000) : uniform_int(rng, 50, 99999);
            return {{money(cents)}};
        }
        case ColKind::tax: {
            static const std::vector<std::string_view> rates = {"0%", "5%", "12%", "18%", "28%", "7.5%"};
            return {{std::string(pick(rng, rates))}};
        }
        case ColKind::discount:
            return {{chance(rng, 0.5) ? money(uniform_int(rng, 0, 50000)) : std::to_string(uniform_int(rng, 1, 25)) + "%"}};
        case ColKind::batch: return {{random_code(rng, 1, 4)}};
        case ColKind::expiry: {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%02d/%02d", uniform_int(rng, 1, 12), uniform_int(rng, 25, 30));
            return {{buf}};
        }
    }
    return {};
}

Block header_content(Rng& rng, const ColumnSpec& spec, bool allow_multiline, double multiline_p) {
    auto words = split_words(pick(rng, spec.headers));
    if (allow_multiline && words.size() >= 2 && chance(rng, multiline_p)) {
        return {Words{words[0]}, Words(words.begin() + 1, words.end())};
    }
    return {words};
}

std::string random_date(Rng& rng) {
    const int d = uniform_int(rng, 1, 28);
    const int m = uniform_int(rng, 1, 12);
    const int y = uniform_int(rng, 2019, 2026);
    char buf[32];
    switch (uniform_int(rng, 0, 3)) {
        case 0: std::snprintf(buf, sizeof buf, "%02d/%02d/%d", d, m, y); break;
        case 1: std::snprintf(buf, sizeof buf, "%d-%02d-%02d", y, m, d); break;
        case 2: std::snprintf(buf, sizeof buf, "%02d-%s-%d", d, std::string(kMonths[static_cast<size_t>(m - 1)]).c_str(), y); break;
        default: std::snprintf(buf, sizeof buf, "%02d.%02d.%d", d, m, y); break;
    }
    return buf;
}

struct KvField {
    Words key;
    Block value;
};

KvField kv_content(Rng& rng, const std::string& field, double multiline_p) {
    if (field == "PO_NUMBER") {
        static const std::vector<std::string_view> keys = {"PO No:", "PO Number:", "Order No.", "P.O. #"};
        const std::string v = chance(rng, 0.5) ? random_code(rng, 2, 6) : random_code(rng, 0, 10);
        return {split_words(pick(rng, keys)), {{v}}};
    }
    if (field == "PO_DATE") {
        static const std::vector<std::string_view> keys = {"Date:", "PO Date:", "Order Date:", "Dated"};
        return {split_words(pick(rng, keys)), {{random_date(rng)}}};
    }
    if (field == "VENDOR_NAME") {
        static const std::vector<std::string_view> keys = {"Vendor:", "Supplier:", "Vendor Name:", "Bill From:"};
        Words name;
        name.emplace_back(pick(rng, kCompanyWords));
        if (chance(rng, 0.5)) name.emplace_back(pick(rng, kCompanyWords));
        name.emplace_back(pick(rng, kCompanyKinds));
        for (auto& w : split_words(pick(rng, kCompanySuffix))) name.push_back(w);
        if (name.size() >= 3 && chance(rng, multiline_p)) {
            const size_t cut = name.size() / 2 + 1;
            return {split_words(pick(rng, keys)),
                    {Words(name.begin(), name.begin() + static_cast<long>(cut)),
                     Words(name.begin() + static_cast<long>(cut), name.end())}};
        }
        return {split_words(pick(rng, keys)), {name}};
    }
    std::string key = field;
    std::replace(key.begin(), key.end(), '_', ' ');
    return {split_words(key + ":"), {{random_code(rng, 2, 5)}}};
}

// Where a placed token belongs in the ground truth.
struct Owner {
    enum Kind { none, header, cell, kv } kind = none;
    int row = 0;
    int col = 0;
    std::string key;
};

struct Placed {
    std::string text;
    BBox box;
    Owner owner;
};

int chars_of(const Words& line) {
    int n = 0;
    for (const auto& w : line) n += static_cast<int>(w.size());
    return n + std::max(0, static_cast<int>(line.size()) - 1);
}

class Layout {
public:
    Layout(double cw, int height) : cw_(cw), height_(height) {}

    // Places one line of words starting at character offset `offset` from x0.
    void line(std::vector<Placed>& out, const Words& words, int x0, double offset, int y, const Owner& owner) const {
        double pos = offset;
        for (const auto& w : words) {
            const int xa = x0 + static_cast<int>(std::floor(pos * cw_));
            const int xb = std::max(xa + 1, x0 + static_cast<int>(std::floor((pos + double(w.size())) * cw_)));
            out.push_back(Placed{w, BBox{std::min(xa, kCoordMax - 1), y, std::min(xb, kCoordMax), y + height_}, owner});
            pos += double(w.size()) + 1.0;
        }
    }

    int width(int chars) const { return static_cast<int>(std::ceil(chars * cw_)); }

private:
    double cw_;
    int height_;
};

GeneratedDoc build_document(const GenProfile& profile, Rng& rng, const std::string& id) {
    const bool finance = profile.kind == GenKind::finance;
    const auto& specs = column_specs();
    const int ncols = uniform_int(rng, profile.min_columns, profile.max_columns);
    const int nrows = uniform_int(rng, profile.min_rows, profile.max_rows);

    // Column kinds: typed columns first by inclusion chance, then fillers.
    std::vector<int> kinds;
    {
        std::vector<int> typed = {2, 5, 6, 7};
        const double include[] = {0.9, 0.8, 0.75, 0.55};
        std::vector<int> chosen;
        for (size_t i = 0; i < typed.size(); ++i) {
            if (chance(rng, include[i])) chosen.push_back(typed[i]);
        }
        std::vector<int> fillers = {1, 3, 4, 8, 9, 10, 11, 12};
        std::shuffle(fillers.begin(), fillers.end(), rng);
        while (static_cast<int>(chosen.size()) > ncols) chosen.pop_back();
        const bool serial = ncols >= 3 && chance(rng, 0.6);
        size_t fi = 0;
        while (static_cast<int>(chosen.size()) + (serial ? 1 : 0) < ncols) {
            chosen.push_back(fi < fillers.size() ? fillers[fi++] : 10);
        }
        // Mostly conventional order, sometimes shuffled.
        if (chance(rng, 0.3)) {
            std::shuffle(chosen.begin(), chosen.end(), rng);
        } else {
            std::stable_sort(chosen.begin(), chosen.end(), [](int a, int b) {
                auto rank = [](int k) { return k == 1 ? 0 : k == 2 ? 1 : k == 3 ? 2 : k == 10 ? 9 : k + 2; };
                return rank(a) < rank(b);
            });
        }
        if (serial) kinds.push_back(0);
        kinds.insert(kinds.end(), chosen.begin(), chosen.end());
    }

    // A cell in column j may span lines only when no column j+10 exists:
    // col_j and col_(j+10) share a tag body in the same row.
    auto multiline_ok = [&](int j) { return j + kNumColumnTags >= ncols; };
    const bool wrapped = ncols > kNumColumnTags;

    std::vector<Block> header(static_cast<size_t>(ncols));
    for (int j = 0; j < ncols; ++j) {
        header[static_cast<size_t>(j)] =
            header_content(rng, specs[static_cast<size_t>(kinds[static_cast<size_t>(j)])], multiline_ok(j), profile.multiline_cell_p);
    }
    std::vector<std::vector<Block>> body(static_cast<size_t>(nrows), std::vector<Block>(static_cast<size_t>(ncols)));
    for (int r = 0; r < nrows; ++r) {
        for (int j = 0; j < ncols; ++j) {
            const auto& spec = specs[static_cast<size_t>(kinds[static_cast<size_t>(j)])];
            if (spec.may_be_empty && !wrapped && j > 0 && chance(rng, 0.05)) continue;
            body[static_cast<size_t>(r)][static_cast<size_t>(j)] =
                cell_content(rng, spec.kind, r, multiline_ok(j), profile.multiline_cell_p);
        }
    }

    // Horizontal layout.
    std::vector<int> col_chars(static_cast<size_t>(ncols), 1);
    for (int j = 0; j < ncols; ++j) {
        auto widen = [&](const Block& b) {
            for (const auto& line : b) col_chars[static_cast<size_t>(j)] = std::max(col_chars[static_cast<size_t>(j)], chars_of(line));
        };
        widen(header[static_cast<size_t>(j)]);
        for (int r = 0; r < nrows; ++r) widen(body[static_cast<size_t>(r)][static_cast<size_t>(j)]);
    }
    const int left = uniform_int(rng, 20, 60);
    const int right_limit = kCoordMax - 10;
    std::vector<int> gaps(static_cast<size_t>(std::max(0, ncols - 1)));
    for (auto& g : gaps) g = uniform_int(rng, 14, 40);
    int total_chars = 0;
    for (const int c : col_chars) total_chars += c;
    double cw = 6.0;
    auto gap_sum = [&] {
        int s = 0;
        for (const int g : gaps) s += g;
        return s;
    };
    if (left + total_chars * cw + gap_sum() + ncols > right_limit) {
        for (auto& g : gaps) g = 8;
        cw = double(right_limit - left - gap_sum() - 2 * ncols) / double(total_chars);
    }
    if (cw < 2.0) {
        throw GenerationError("infeasible layout: " + std::to_string(ncols) + " columns need " +
                              std::to_string(total_chars) + " characters, page width is " + std::to_string(kCoordMax));
    }
    const int height = uniform_int(rng, 10, 13);
    const Layout layout(cw, height);
    std::vector<int> col_x(static_cast<size_t>(ncols));
    {
        int x = left;
        for (int j = 0; j < ncols; ++j) {
            col_x[static_cast<size_t>(j)] = x;
            x += layout.width(col_chars[static_cast<size_t>(j)]) + 1;
            if (j + 1 < ncols) x += gaps[static_cast<size_t>(j)];
        }
        if (x > kCoordMax) throw GenerationError("infeasible layout: table needs width " + std::to_string(x));
    }

    // Vertical layout: count lines first so the pitch fits the page.
    int lines_needed = 2;  // title + spacing
    std::vector<std::string> kv_fields;
    if (finance) {
        kv_fields = profile.kv_fields;
        lines_needed += static_cast<int>(kv_fields.size()) * 2;
    }
    auto block_lines = [](const std::vector<Block>& cells) {
        size_t n = 1;
        for (const auto& b : cells) n = std::max(n, b.size());
        return static_cast<int>(n);
    };
    lines_needed += block_lines(header) + 1;
    for (const auto& row : body) lines_needed += block_lines(row);
    lines_needed += 2;
    // Wrapped lines inside a cell sit closer together than separate rows.
    int pitch = height + uniform_int(rng, 8, 13);
    int lead = height + uniform_int(rng, 2, 4);
    const int top = uniform_int(rng, 20, 50);
    pitch = std::min(pitch, (kCoordMax - 10 - top) / lines_needed);
    if (pitch < height + 2) {
        throw GenerationError("infeasible layout: " + std::to_string(lines_needed) + " lines do not fit the page");
    }
    lead = std::min(lead, pitch);

    std::vector<Placed> placed;
    int y = top;
    {
        static const std::vector<std::string_view> titles = {"PURCHASE ORDER", "Purchase Order", "TAX INVOICE",
                                                             "INVOICE", "Order Confirmation", "Delivery Note"};
        const Words title = split_words(pick(rng, titles));
        const int x = uniform_int(rng, left, std::max(left, 400));
        layout.line(placed, title, x, 0, y, Owner{});
        y += pitch * 2;
    }
    if (finance) {
        std::vector<KvField> fields;
        for (const auto& f : kv_fields) fields.push_back(kv_content(rng, f, profile.multiline_cell_p));
        // Optionally pair a short field on the right half of the previous line.
        const int right_x = 560;
        for (size_t i = 0; i < fields.size(); ++i) {
            const auto& f = fields[i];
            Owner owner{Owner::kv, 0, 0, kv_fields[i]};
            const int key_chars = chars_of(f.key) + 1;
            int x = left;
            if (i > 0 && f.value.size() == 1 && fields[i - 1].value.size() == 1 && chance(rng, 0.4) &&
                layout.width(chars_of(fields[i - 1].key) + 1 + chars_of(fields[i - 1].value[0])) + left + 20 < right_x &&
                right_x + layout.width(key_chars + chars_of(f.value[0])) < right_limit) {
                x = right_x;
                y -= pitch;
            }
            layout.line(placed, f.key, x, 0, y, Owner{});
            for (size_t l = 0; l < f.value.size(); ++l) {
                layout.line(placed, f.value[l], x, key_chars, y + static_cast<int>(l) * lead, owner);
            }
            y += static_cast<int>(f.value.size() - 1) * lead + pitch;
        }
        y += pitch;
    } else if (chance(rng, 0.5)) {
        Words note = {"Ref", random_code(rng, 2, 4)};
        layout.line(placed, note, left, 0, y, Owner{});
        y += pitch * 2;
    }

    auto place_row = [&](const std::vector<Block>& cells, Owner::Kind kind, int r) {
        int lines = 1;
        for (int j = 0; j < ncols; ++j) {
            const auto& b = cells[static_cast<size_t>(j)];
            lines = std::max(lines, static_cast<int>(b.size()));
            const auto& spec = specs[static_cast<size_t>(kinds[static_cast<size_t>(j)])];
            for (size_t l = 0; l < b.size(); ++l) {
                const double off = spec.right_align && kind == Owner::cell
                                       ? double(col_chars[static_cast<size_t>(j)] - chars_of(b[l]))
                                       : 0.0;
                layout.line(placed, b[l], col_x[static_cast<size_t>(j)], off, y + static_cast<int>(l) * lead,
                            Owner{kind, r, j, {}});
            }
        }
        y += (lines - 1) * lead + pitch;
    };
    place_row(header, Owner::header, 0);
    for (int r = 0; r < nrows; ++r) place_row(body[static_cast<size_t>(r)], Owner::cell, r);

    if (chance(rng, 0.5) && y + pitch <= kCoordMax - height) {
        static const std::vector<std::string_view> totals = {"Grand Total", "Total", "Net Payable", "Sub Total"};
        Words line = split_words(pick(rng, totals));
        line.push_back(money(uniform_int(rng, 1000, 90000000)));
        layout.line(placed, line, left, 0, y + pitch / 2, Owner{});
    }

    // Reading order.
    std::vector<BBox> boxes;
    for (const auto& p : placed) boxes.push_back(p.box);
    const auto lines = assign_lines(boxes);
    std::vector<int> order(placed.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const auto la = lines.line_of[static_cast<size_t>(a)];
        const auto lb = lines.line_of[static_cast<size_t>(b)];
        if (la != lb) return la < lb;
        return boxes[static_cast<size_t>(a)].x_min < boxes[static_cast<size_t>(b)].x_min;
    });

    GeneratedDoc out;
    out.doc.id = id;
    ExtractedTable& truth = out.truth;
    truth.header.resize(static_cast<size_t>(ncols));
    truth.rows.resize(static_cast<size_t>(nrows));
    std::vector<std::vector<std::vector<int>>> cell_tokens(static_cast<size_t>(nrows),
                                                           std::vector<std::vector<int>>(static_cast<size_t>(ncols)));
    for (size_t pos = 0; pos < order.size(); ++pos) {
        const auto& p = placed[static_cast<size_t>(order[pos])];
        out.doc.tokens.push_back(Token{p.text, p.box, std::nullopt, std::nullopt, std::nullopt});
        const int idx = static_cast<int>(pos);
        switch (p.owner.kind) {
            case Owner::header: truth.header[static_cast<size_t>(p.owner.col)].provenance.push_back(idx); break;
            case Owner::cell:
                cell_tokens[static_cast<size_t>(p.owner.row)][static_cast<size_t>(p.owner.col)].push_back(idx);
                break;
            case Owner::kv: truth.kv_provenance[p.owner.key].push_back(idx); break;
            case Owner::none: break;
        }
    }
    auto join = [&](const std::vector<int>& idx) {
        std::string s;
        for (const int i : idx) {
            if (!s.empty()) s += ' ';
            s += out.doc.tokens[static_cast<size_t>(i)].text;
        }
        return s;
    };
    for (int j = 0; j < ncols; ++j) {
        auto& h = truth.header[static_cast<size_t>(j)];
        h.text = join(h.provenance);
        const char* label = specs[static_cast<size_t>(kinds[static_cast<size_t>(j)])].label;
        if (finance && label) h.label = label;
    }
    for (int r = 0; r < nrows; ++r) {
        for (int j = 0; j < ncols; ++j) {
            const auto& idx = cell_tokens[static_cast<size_t>(r)][static_cast<size_t>(j)];
            if (!idx.empty()) truth.rows[static_cast<size_t>(r)].push_back(Cell{j, join(idx), idx});
        }
    }
    for (const auto& [key, idx] : truth.kv_provenance) truth.key_values[key] = join(idx);

    out.doc = grid_to_tags(std::move(out.doc), truth, finance);
    return out;
}

}  // namespace

GeneratedDoc generate_one(const GenProfile& profile, std::uint64_t index) {
    profile.validate();
    Rng rng(splitmix64(profile.seed * 0x100000001b3ULL + index));
    const std::string id = gen_kind_name(profile.kind) + "-" + std::to_string(profile.seed) + "-" + std::to_string(index);
    return build_document(profile, rng, id);
}

std::vector<GeneratedDoc> generate(const GenProfile& profile, int count) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    std::vector<GeneratedDoc> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(generate_one(profile, static_cast<std::uint64_t>(i)));
    return out;
}

Document grid_to_tags(Document doc, const ExtractedTable& grid, bool labeled, const TagSchema& schema) {
    const int n = static_cast<int>(doc.tokens.size());
    const auto lines = assign_lines(doc);
    std::vector<bool> owned(static_cast<size_t>(n), false);
    auto claim = [&](std::vector<int> idx) {
        std::sort(idx.begin(), idx.end());
        for (const int t : idx) {
            if (t < 0 || t >= n) throw GenerationError("grid references token " + std::to_string(t) + " outside the document");
            if (owned[static_cast<size_t>(t)]) {
                throw GenerationError("token " + std::to_string(t) + " ('" + doc.tokens[static_cast<size_t>(t)].text +
                                      "') is assigned to two cells");
            }
            owned[static_cast<size_t>(t)] = true;
        }
        return idx;
    };
    const int header_body = *schema.row.body_index("header_row");
    const int row_body = *schema.row.body_index("row");

    std::vector<Segment> rows;
    std::vector<Segment> cols;
    std::vector<Segment> labels;
    auto label_body = [&](const std::string& name) {
        const auto b = schema.label.body_index(name);
        if (!b) throw GenerationError("label '" + name + "' is not in the label set");
        return *b;
    };

    {
        Segment hr{Head::row, header_body, {}};
        for (size_t j = 0; j < grid.header.size(); ++j) {
            const auto& h = grid.header[j];
            if (h.provenance.empty()) continue;
            auto idx = claim(h.provenance);
            hr.token_indices.insert(hr.token_indices.end(), idx.begin(), idx.end());
            cols.push_back(Segment{Head::column, static_cast<int>(j) % kNumColumnTags, idx});
            if (labeled && h.label) labels.push_back(Segment{Head::label, label_body(*h.label), idx});
        }
        std::sort(hr.token_indices.begin(), hr.token_indices.end());
        if (!hr.token_indices.empty()) rows.push_back(std::move(hr));
    }
    for (const auto& row : grid.rows) {
        Segment rs{Head::row, row_body, {}};
        for (const auto& c : row) {
            if (c.provenance.empty()) continue;
            auto idx = claim(c.provenance);
            rs.token_indices.insert(rs.token_indices.end(), idx.begin(), idx.end());
            cols.push_back(Segment{Head::column, c.col % kNumColumnTags, idx});
            const auto col = static_cast<size_t>(c.col);
            if (labeled && col < grid.header.size() && grid.header[col].label) {
                labels.push_back(Segment{Head::label, label_body(*grid.header[col].label), idx});
            }
        }
        std::sort(rs.token_indices.begin(), rs.token_indices.end());
        if (!rs.token_indices.empty()) rows.push_back(std::move(rs));
    }
    if (labeled) {
        for (const auto& [key, prov] : grid.kv_provenance) {
            if (prov.empty()) continue;
            labels.push_back(Segment{Head::label, label_body(key), claim(prov)});
        }
    }

    apply_tags(doc, Head::row, rows, lines);
    apply_tags(doc, Head::column, cols, lines);
    if (labeled) {
        apply_tags(doc, Head::label, labels, lines);
    } else {
        for (auto& t : doc.tokens) t.label_tag.reset();
    }
    return doc;
}

std::filesystem::path ground_truth_path(const std::filesystem::path& corpus) {
    auto p = corpus;
    const std::string stem = corpus.extension() == ".jsonl" ? corpus.stem().string() : corpus.filename().string();
    return p.replace_filename(stem + ".gt.jsonl");
}

void save_ground_truth(const std::vector<GeneratedDoc>& docs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& d : docs) {
        nlohmann::ordered_json j;
        j["id"] = d.doc.id;
        const auto table = nlohmann::ordered_json::parse(export_json(d.truth));
        for (const auto& [k, v] : table.items()) j[k] = v;
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::pair<std::string, ExtractedTable>> load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open ground truth file " + path.string());
    std::vector<std::pair<std::string, ExtractedTable>> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out.emplace_back(j.at("id").get<std::string>(), parse_table_json(line));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace tabtag
