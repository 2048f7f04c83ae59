#include "tabtag/spatial.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace tabtag {

SpatialInit parse_spatial_init(std::string_view s) {
    if (s == "random_normal") return SpatialInit::random_normal;
    if (s == "sinusoidal") return SpatialInit::sinusoidal;
    throw std::invalid_argument("unknown spatial init scheme '" + std::string(s) + "'");
}

std::string_view spatial_init_name(SpatialInit init) {
    return init == SpatialInit::sinusoidal ? "sinusoidal" : "random_normal";
}

std::array<int, kNumSpatialFeatures> spatial_buckets(const BBox& box) {
    return {box.x_min, box.y_min, box.x_max, box.y_max, box.width(), box.height()};
}

template <typename T>
SpatialTables<T> init_spatial(int d, SpatialInit scheme, std::uint64_t seed) {
    if (d <= 0 || d % kNumSpatialFeatures != 0) {
        throw std::invalid_argument("model dimension " + std::to_string(d) + " is not divisible by 6");
    }
    const int part = d / kNumSpatialFeatures;
    SpatialTables<T> out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.02);
    for (auto& table : out.tables) {
        table.resize(kNumBuckets, part);
        for (int b = 0; b < kNumBuckets; ++b) {
            for (int c = 0; c < part; ++c) {
                if (scheme == SpatialInit::random_normal) {
                    table(b, c) = static_cast<T>(normal(rng));
                } else {
                    const double freq = std::pow(10000.0, 2.0 * (c / 2) / part);
                    const double angle = b / freq;
                    table(b, c) = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
                }
            }
        }
    }
    return out;
}

template <typename T>
void add_spatial_embed(const BBox& box, const SpatialTables<T>& tables, Eigen::Ref<RowVec<T>> out) {
    const auto buckets = spatial_buckets(box);
    const int part = tables.part_dim();
    for (int p = 0; p < kNumSpatialFeatures; ++p) {
        out.segment(p * part, part) += tables.tables[static_cast<size_t>(p)].row(buckets[static_cast<size_t>(p)]);
    }
}

template <typename T>
RowVec<T> spatial_embed(const BBox& box, const SpatialTables<T>& tables) {
    RowVec<T> out = RowVec<T>::Zero(tables.model_dim());
    add_spatial_embed<T>(box, tables, out);
    return out;
}

template <typename T>
SpatialRowGrad<T> spatial_embed_grad(const Eigen::Ref<const RowVec<T>>& upstream, const BBox& box) {
    SpatialRowGrad<T> g;
    g.buckets = spatial_buckets(box);
    const int part = static_cast<int>(upstream.size()) / kNumSpatialFeatures;
    for (int p = 0; p < kNumSpatialFeatures; ++p) {
        g.values[static_cast<size_t>(p)] = upstream.segment(p * part, part);
    }
    return g;
}

template <typename T>
void accumulate_spatial_grad(const Eigen::Ref<const RowVec<T>>& upstream, const BBox& box,
                             SpatialTables<T>& grad) {
    const auto buckets = spatial_buckets(box);
    const int part = grad.part_dim();
    for (int p = 0; p < kNumSpatialFeatures; ++p) {
        grad.tables[static_cast<size_t>(p)].row(buckets[static_cast<size_t>(p)]) += upstream.segment(p * part, part);
    }
}

#define TABTAG_INSTANTIATE_SPATIAL(T)                                                                   \
    template SpatialTables<T> init_spatial<T>(int, SpatialInit, std::uint64_t);                         \
    template RowVec<T> spatial_embed<T>(const BBox&, const SpatialTables<T>&);                          \
    template void add_spatial_embed<T>(const BBox&, const SpatialTables<T>&, Eigen::Ref<RowVec<T>>);    \
    template SpatialRowGrad<T> spatial_embed_grad<T>(const Eigen::Ref<const RowVec<T>>&, const BBox&); \
    template void accumulate_spatial_grad<T>(const Eigen::Ref<const RowVec<T>>&, const BBox&, SpatialTables<T>&);

TABTAG_INSTANTIATE_SPATIAL(float)
TABTAG_INSTANTIATE_SPATIAL(double)

}  // namespace tabtag
