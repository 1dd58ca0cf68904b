#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "quadml/losses.hpp"
#include "quadml/rng.hpp"

namespace quadml {

/// Sample indices grouped by label value. Lists are disjoint and cover the
/// dataset; labels that never occur are simply absent.
struct ClassIndex {
    std::map<int, std::vector<std::size_t>> by_label;

    static ClassIndex build(const std::vector<int>& labels);
};

struct SamplerConfig {
    double outlier_share = 1.0 / 3.0;
    std::size_t batch_size = 64;      // >= 4: a quadruplet needs 4 distinct samples
    std::size_t quads_per_batch = 128;
    std::uint64_t seed = 0;
};

/// P(outlier) = outlier_share, the rest split evenly over the C labeled
/// classes. Probabilities sum to 1.
std::map<int, double> class_sampling_weights(std::size_t num_classes, double outlier_share);

/// B indices drawn i.i.d. with replacement: label by weight, then uniform
/// within the label.
std::vector<std::size_t> sample_batch(const ClassIndex& index,
                                      const std::map<int, double>& weights, std::size_t batch_size,
                                      Rng& rng);

bool is_valid_quadruplet(const std::vector<int>& labels, const Quadruplet& q);

/// All valid ordered tuples in lexicographic (a, p, n1, n2) index order.
/// Guarded to batches of at most 64 samples; larger batches must sample.
QuadrupletSet enumerate_valid_quadruplets(const std::vector<int>& labels);

/// Up to `count` valid tuples by rejection sampling (component draws by role,
/// capped at 100*count attempts). Throws DataError when the batch composition
/// admits no valid quadruplet at all, signalling the caller to resample.
QuadrupletSet sample_quadruplets(const std::vector<int>& labels, std::size_t count, Rng& rng);

/// Hard-mining share for a 1-based epoch: 1.0 through epoch 2, linear decay
/// to 0.1 at epoch 7, constant afterwards.
double mining_fraction(std::size_t epoch);

} // namespace quadml
