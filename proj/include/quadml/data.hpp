#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "quadml/tensor.hpp"

namespace quadml {

/// Feature matrix with labels in {-1, 0..C-1} and opaque per-row ids.
/// C is the number of labeled classes (1 + max non-outlier label).
struct Dataset {
    std::size_t feature_dim = 0;     // D
    std::size_t num_classes = 0;     // C
    std::vector<double> features;    // [N x D] row-major
    std::vector<int> labels;         // [N]
    std::vector<std::string> ids;    // [N]

    std::size_t size() const { return labels.size(); }
    /// Whole dataset as a constant [N x D] tensor.
    Tensor feature_tensor() const;
    /// Single row as a [1 x D] tensor.
    Tensor row_tensor(std::size_t row) const;
    /// Subset by row indices, order preserved.
    Dataset subset(const std::vector<std::size_t>& rows) const;
    /// Checks label range, id count and the C invariant; throws DataError.
    void validate() const;
};

/// CSV with header `id,label,f0,...,f{D-1}`; features round-trip exactly.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

/// Packed binary, magic "QND1", little-endian: header (magic, version u32,
/// N u64, D u64, C i64), labels i64[N], features f64[N*D] row-major.
/// Ids are not stored; loading synthesizes row-number ids.
Dataset load_binary(const std::string& path);
void save_binary(const Dataset& ds, const std::string& path);

/// Loads by extension: ".csv" text, anything else binary.
Dataset load_dataset(const std::string& path);

struct SplitRatios {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

struct SplitResult {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Deterministic three-way split. Stratified mode preserves per-label
/// proportions within one sample and requires every stratum to have at
/// least 3 members.
SplitResult split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed,
                  bool stratified);

enum class OutlierLaw { uniform_box, shifted_gaussians };

struct SynthConfig {
    std::size_t num_classes = 6;
    std::size_t feature_dim = 32;
    std::size_t samples_per_class = 300;
    std::size_t outlier_count = 600;
    double cluster_sigma = 1.0;
    double min_center_separation = 10.0; // in units of sigma
    OutlierLaw outlier_law = OutlierLaw::uniform_box;
    std::uint64_t seed = 0;
};

/// Isotropic Gaussian clusters with pairwise center distance at least
/// min_center_separation * sigma, plus outliers guaranteed outside every
/// cluster's 3-sigma ball. Fully seed-deterministic.
Dataset generate_synthetic(const SynthConfig& config);

} // namespace quadml
