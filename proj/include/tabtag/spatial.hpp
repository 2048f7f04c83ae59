#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "tabtag/doc_model.hpp"
#include "tabtag/tensor.hpp"

namespace tabtag {

enum class SpatialInit : std::uint8_t { random_normal, sinusoidal };

SpatialInit parse_spatial_init(std::string_view s);
std::string_view spatial_init_name(SpatialInit init);

inline constexpr int kNumSpatialFeatures = 6;
inline constexpr std::array<std::string_view, kNumSpatialFeatures> kSpatialFeatureNames{
    "x_min", "y_min", "x_max", "y_max", "width", "height"};

/// Buckets looked up for a box, in concatenation order
/// x_min, y_min, x_max, y_max, width, height.
std::array<int, kNumSpatialFeatures> spatial_buckets(const BBox& box);

/// Six bucketed lookup tables of shape 1001 x (d/6).
template <typename T>
struct SpatialTables {
    std::array<Mat<T>, kNumSpatialFeatures> tables;

    int part_dim() const { return static_cast<int>(tables[0].cols()); }
    int model_dim() const { return kNumSpatialFeatures * part_dim(); }
};

/// Throws std::invalid_argument when d is not a positive multiple of 6.
template <typename T>
SpatialTables<T> init_spatial(int d, SpatialInit scheme, std::uint64_t seed);

/// Concatenated embedding of length d.
template <typename T>
RowVec<T> spatial_embed(const BBox& box, const SpatialTables<T>& tables);

/// Adds the six looked-up rows of `box` onto `out` (length d).
template <typename T>
void add_spatial_embed(const BBox& box, const SpatialTables<T>& tables, Eigen::Ref<RowVec<T>> out);

/// Gradient contribution of one token: slice p of `upstream` belongs to
/// table p, row `buckets[p]`. No other row is touched.
template <typename T>
struct SpatialRowGrad {
    std::array<int, kNumSpatialFeatures> buckets{};
    std::array<RowVec<T>, kNumSpatialFeatures> values;
};

template <typename T>
SpatialRowGrad<T> spatial_embed_grad(const Eigen::Ref<const RowVec<T>>& upstream, const BBox& box);

/// Accumulates the sparse gradient of one token into dense gradient tables.
template <typename T>
void accumulate_spatial_grad(const Eigen::Ref<const RowVec<T>>& upstream, const BBox& box,
                             SpatialTables<T>& grad);

}  // namespace tabtag
