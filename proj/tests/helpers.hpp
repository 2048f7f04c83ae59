#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>
#include <unistd.h>

#include "tabtag/doc_model.hpp"
#include "tabtag/tagging.hpp"

namespace testutil {

inline tabtag::Token tok(std::string text, int x0, int y0, int x1, int y1) {
    tabtag::Token t;
    t.text = std::move(text);
    t.bbox = tabtag::BBox{x0, y0, x1, y1};
    return t;
}

// Per-process scratch directory, removed at exit.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / (name + "-" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& f) const { return path_ / f; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// Random tagging instance: n tokens on arbitrary lines, segments of up to
// `bodies` bodies. Same-body segments never interleave, which is the
// condition under which decode(encode(x)) == x.
struct TaggingInstance {
    size_t n = 0;
    tabtag::LineAssignment lines;
    std::vector<tabtag::Segment> segments;
};

inline TaggingInstance random_tagging_instance(std::mt19937_64& rng, tabtag::Head head, int bodies) {
    TaggingInstance x;
    x.n = std::uniform_int_distribution<size_t>(0, 40)(rng);
    x.lines.num_lines = std::uniform_int_distribution<int>(1, 8)(rng);
    for (size_t i = 0; i < x.n; ++i) {
        x.lines.line_of.push_back(std::uniform_int_distribution<int>(0, x.lines.num_lines - 1)(rng));
    }
    std::vector<int> open(static_cast<size_t>(bodies), -1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (size_t i = 0; i < x.n; ++i) {
        if (u(rng) < 0.3) continue;
        const int body = std::uniform_int_distribution<int>(0, bodies - 1)(rng);
        int& o = open[static_cast<size_t>(body)];
        if (o >= 0 && u(rng) < 0.6) {
            x.segments[static_cast<size_t>(o)].token_indices.push_back(static_cast<int>(i));
        } else {
            o = static_cast<int>(x.segments.size());
            x.segments.push_back(tabtag::Segment{head, body, {static_cast<int>(i)}});
        }
    }
    return x;
}

}  // namespace testutil
