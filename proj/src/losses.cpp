#include "quadml/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "quadml/model.hpp"

namespace quadml {

namespace {

constexpr double kProbFloor = 1e-12;

void check_quadruplet(const QuadrupletSet& quads, const Quadruplet& q, std::size_t batch_size) {
    const auto& labels = quads.labels;
    if (q.anchor >= batch_size || q.positive >= batch_size || q.negative1 >= batch_size ||
        q.negative2 >= batch_size) {
        throw std::logic_error("quadruplet: index out of range for batch of " +
                               std::to_string(batch_size));
    }
    if (q.anchor == q.positive || q.anchor == q.negative1 || q.anchor == q.negative2 ||
        q.positive == q.negative1 || q.positive == q.negative2 || q.negative1 == q.negative2) {
        throw std::logic_error("quadruplet: the four indices must be distinct");
    }
    if (labels[q.anchor] == kOutlierLabel) {
        throw std::logic_error("quadruplet: the anchor must belong to a labeled class, not the "
                               "outlier class");
    }
    if (labels[q.anchor] != labels[q.positive]) {
        throw std::logic_error("quadruplet: anchor and positive must share a class");
    }
    if (labels[q.negative1] == labels[q.anchor]) {
        throw std::logic_error("quadruplet: negative1 must come from a class other than the "
                               "anchor's");
    }
    if (labels[q.negative2] == labels[q.anchor] || labels[q.negative2] == labels[q.negative1]) {
        throw std::logic_error("quadruplet: negative2 must come from a class different from both "
                               "the anchor's and negative1's");
    }
}

Tensor hinge(const Tensor& x) { return leaky_relu(x, 0.0); }

} // namespace

std::vector<std::string> loss_config_warnings(const LossConfig& config) {
    std::vector<std::string> warnings;
    if (config.margin1 < config.margin2) {
        warnings.push_back("loss: margin1 < margin2; the quadruplet formulation expects the "
                           "anchor-negative margin to dominate");
    }
    return warnings;
}

Tensor quadruplet_loss(const Tensor& embeddings, const QuadrupletSet& quads, double margin1,
                       double margin2, double hard_fraction) {
    if (quads.items.empty()) throw std::domain_error("quadruplet_loss: empty quadruplet set");
    if (margin1 < 0.0 || margin2 < 0.0) {
        throw std::domain_error("quadruplet_loss: margins must be non-negative");
    }
    if (!(hard_fraction > 0.0 && hard_fraction <= 1.0)) {
        throw std::domain_error("quadruplet_loss: hard_fraction must lie in (0, 1]");
    }
    if (embeddings.shape().size() != 2) {
        throw std::invalid_argument("quadruplet_loss: embeddings must be [B x d]");
    }
    const std::size_t batch_size = embeddings.dim(0);
    if (quads.labels.size() != batch_size) {
        throw std::logic_error("quadruplet_loss: label count does not match the embedding batch");
    }

    std::vector<Tensor> terms;
    terms.reserve(quads.items.size());
    for (const Quadruplet& q : quads.items) {
        check_quadruplet(quads, q, batch_size);
        Tensor d_ap = row_distance(embeddings, q.anchor, q.positive);
        Tensor d_an = row_distance(embeddings, q.anchor, q.negative1);
        Tensor d_nn = row_distance(embeddings, q.negative1, q.negative2);
        Tensor first = hinge(add_scalar(sub(d_ap, d_an), margin1));
        Tensor second = hinge(add_scalar(sub(d_ap, d_nn), margin2));
        terms.push_back(add(first, second));
    }
    Tensor stacked = stack_scalars(terms);

    const std::size_t count = terms.size();
    const auto keep = static_cast<std::size_t>(
        std::ceil(hard_fraction * static_cast<double>(count)));
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    auto values = stacked.data();
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    order.resize(std::clamp<std::size_t>(keep, 1, count));
    return mean(take(stacked, order));
}

Tensor focal_loss(const Tensor& probs, const std::vector<std::size_t>& targets, double gamma) {
    if (probs.shape().size() != 2) {
        throw std::invalid_argument("focal_loss: probabilities must be [B x K]");
    }
    const std::size_t rows = probs.dim(0), cols = probs.dim(1);
    if (targets.size() != rows) {
        throw std::invalid_argument("focal_loss: target count does not match the batch");
    }
    if (gamma < 0.0) throw std::domain_error("focal_loss: gamma must be non-negative");
    std::vector<std::size_t> flat(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (targets[i] >= cols) {
            throw std::out_of_range("focal_loss: target index " + std::to_string(targets[i]) +
                                    " out of range for " + std::to_string(cols) + " classes");
        }
        flat[i] = i * cols + targets[i];
    }
    Tensor p_t = take(probs, std::move(flat));
    Tensor modulator = pow_elementwise(add_scalar(scale(p_t, -1.0), 1.0), gamma);
    Tensor log_term = scale(log_elementwise(clamp_min(p_t, kProbFloor)), -1.0);
    return mean(mul(modulator, log_term));
}

double class_weight(std::size_t num_classes) {
    if (num_classes < 2) {
        throw std::domain_error("class_weight: needs at least 2 classes (ln 1 = 0)");
    }
    return 1.0 / std::log(static_cast<double>(num_classes));
}

Tensor combined_loss(const Tensor& embeddings, const QuadrupletSet& quads, const Tensor& probs,
                     const std::vector<std::size_t>& targets, const LossConfig& config,
                     double hard_fraction, std::size_t num_classes) {
    Tensor quad = quadruplet_loss(embeddings, quads, config.margin1, config.margin2,
                                  config.hard_fraction_override.value_or(hard_fraction));
    Tensor focal = focal_loss(probs, targets, config.focal_gamma);
    return add(quad, scale(focal, class_weight(num_classes)));
}

} // namespace quadml
