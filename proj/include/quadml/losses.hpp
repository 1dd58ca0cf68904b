#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "quadml/tensor.hpp"

namespace quadml {

struct LossConfig {
    double margin1 = 1.0;      // anchor-negative hinge margin
    double margin2 = 0.5;      // negative-pair hinge margin
    double focal_gamma = 2.0;  // focusing exponent
    std::optional<double> hard_fraction_override; // in (0, 1]; wins over the schedule
};

/// Non-fatal notes (margin1 < margin2 and similar).
std::vector<std::string> loss_config_warnings(const LossConfig& config);

struct Quadruplet {
    std::size_t anchor;
    std::size_t positive;
    std::size_t negative1;
    std::size_t negative2;
};

/// Index tuples into one batch, carrying the batch labels the tuples were
/// drawn against. A tuple is valid when anchor and positive share a
/// non-outlier class, negative1 is of any other class, negative2 is of a
/// class different from both, and all four indices are distinct.
struct QuadrupletSet {
    std::vector<Quadruplet> items;
    std::vector<int> labels; // per batch row
};

/// Per-tuple hinge loss over Euclidean embedding distances:
///   max(0, rho(a,p) - rho(a,n1) + margin1) + max(0, rho(a,p) - rho(n1,n2) + margin2)
/// The hardest ceil(hard_fraction * |quads|) tuples (largest terms) are kept
/// and averaged; gradients flow only through the kept terms.
Tensor quadruplet_loss(const Tensor& embeddings, const QuadrupletSet& quads, double margin1,
                       double margin2, double hard_fraction);

/// Mean over the batch of (1 - p_t)^gamma * (-ln p_t), with the log argument
/// clamped below at 1e-12. Targets are softmax indices in [0, C].
Tensor focal_loss(const Tensor& probs, const std::vector<std::size_t>& targets, double gamma);

/// Classification-loss normalizer 1/ln(C); requires C >= 2.
double class_weight(std::size_t num_classes);

/// quadruplet_loss + class_weight(C) * focal_loss.
Tensor combined_loss(const Tensor& embeddings, const QuadrupletSet& quads, const Tensor& probs,
                     const std::vector<std::size_t>& targets, const LossConfig& config,
                     double hard_fraction, std::size_t num_classes);

} // namespace quadml
