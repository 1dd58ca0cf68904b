#include "quadml/sampling.hpp"

#include <algorithm>
#include <stdexcept>

#include "quadml/errors.hpp"
#include "quadml/model.hpp"

namespace quadml {

ClassIndex ClassIndex::build(const std::vector<int>& labels) {
    ClassIndex index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        index.by_label[labels[i]].push_back(i);
    }
    return index;
}

std::map<int, double> class_sampling_weights(std::size_t num_classes, double outlier_share) {
    if (num_classes == 0) {
        throw std::domain_error("class_sampling_weights: needs at least one labeled class");
    }
    if (!(outlier_share > 0.0 && outlier_share < 1.0)) {
        throw std::domain_error("class_sampling_weights: outlier_share must lie in (0, 1)");
    }
    std::map<int, double> weights;
    weights[kOutlierLabel] = outlier_share;
    const double per_class = (1.0 - outlier_share) / static_cast<double>(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        weights[static_cast<int>(c)] = per_class;
    }
    return weights;
}

std::vector<std::size_t> sample_batch(const ClassIndex& index,
                                      const std::map<int, double>& weights, std::size_t batch_size,
                                      Rng& rng) {
    std::vector<int> labels;
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& [label, weight] : weights) {
        if (weight < 0.0) throw ConfigError("sample_batch: negative weight");
        if (weight == 0.0) continue;
        auto it = index.by_label.find(label);
        if (it == index.by_label.end() || it->second.empty()) {
            throw ConfigError("sample_batch: label " + std::to_string(label) +
                              " has positive weight but no samples");
        }
        total += weight;
        labels.push_back(label);
        cumulative.push_back(total);
    }
    if (labels.empty()) throw ConfigError("sample_batch: all weights are zero");

    std::vector<std::size_t> batch(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const double u = rng.uniform() * total;
        const auto pos = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t which = std::min<std::size_t>(pos - cumulative.begin(), labels.size() - 1);
        const auto& pool = index.by_label.at(labels[which]);
        batch[i] = pool[rng.uniform_index(pool.size())];
    }
    return batch;
}

bool is_valid_quadruplet(const std::vector<int>& labels, const Quadruplet& q) {
    const std::size_t n = labels.size();
    if (q.anchor >= n || q.positive >= n || q.negative1 >= n || q.negative2 >= n) return false;
    if (q.anchor == q.positive || q.anchor == q.negative1 || q.anchor == q.negative2 ||
        q.positive == q.negative1 || q.positive == q.negative2 || q.negative1 == q.negative2) {
        return false;
    }
    const int anchor_class = labels[q.anchor];
    if (anchor_class == kOutlierLabel) return false;
    if (labels[q.positive] != anchor_class) return false;
    if (labels[q.negative1] == anchor_class) return false;
    if (labels[q.negative2] == anchor_class || labels[q.negative2] == labels[q.negative1]) {
        return false;
    }
    return true;
}

QuadrupletSet enumerate_valid_quadruplets(const std::vector<int>& labels) {
    if (labels.size() > 64) {
        throw std::invalid_argument("enumerate_valid_quadruplets: batch of " +
                                    std::to_string(labels.size()) +
                                    " exceeds the 64-sample guard; use sample_quadruplets");
    }
    QuadrupletSet set;
    set.labels = labels;
    const std::size_t n = labels.size();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t n1 = 0; n1 < n; ++n1) {
                for (std::size_t n2 = 0; n2 < n; ++n2) {
                    Quadruplet q{a, p, n1, n2};
                    if (is_valid_quadruplet(labels, q)) set.items.push_back(q);
                }
            }
        }
    }
    return set;
}

namespace {

// A valid tuple exists iff some non-outlier class has two samples and at
// least two further labels are present to fill both negative roles.
bool quadruplet_possible(const std::vector<int>& labels) {
    std::map<int, std::size_t> counts;
    for (int label : labels) ++counts[label];
    for (const auto& [label, count] : counts) {
        if (label == kOutlierLabel || count < 2) continue;
        std::size_t other_labels = 0;
        for (const auto& [other, other_count] : counts) {
            if (other != label && other_count > 0) ++other_labels;
        }
        if (other_labels >= 2) return true;
    }
    return false;
}

} // namespace

QuadrupletSet sample_quadruplets(const std::vector<int>& labels, std::size_t count, Rng& rng) {
    if (count == 0) throw std::invalid_argument("sample_quadruplets: count must be positive");
    if (!quadruplet_possible(labels)) {
        throw DataError("sample_quadruplets: batch composition admits no valid quadruplet "
                        "(need one class with two samples plus two other labels); resample the "
                        "batch");
    }
    ClassIndex index = ClassIndex::build(labels);
    std::vector<std::size_t> anchor_pool;
    for (const auto& [label, members] : index.by_label) {
        if (label == kOutlierLabel || members.size() < 2) continue;
        anchor_pool.insert(anchor_pool.end(), members.begin(), members.end());
    }

    QuadrupletSet set;
    set.labels = labels;
    set.items.reserve(count);
    const std::size_t max_attempts = 100 * count;
    std::size_t attempts = 0;
    while (set.items.size() < count && attempts < max_attempts) {
        ++attempts;
        const std::size_t a = anchor_pool[rng.uniform_index(anchor_pool.size())];
        const auto& classmates = index.by_label.at(labels[a]);
        const std::size_t p = classmates[rng.uniform_index(classmates.size())];
        const std::size_t n1 = rng.uniform_index(labels.size());
        const std::size_t n2 = rng.uniform_index(labels.size());
        Quadruplet q{a, p, n1, n2};
        if (is_valid_quadruplet(labels, q)) set.items.push_back(q);
    }
    if (set.items.empty()) {
        throw DataError("sample_quadruplets: no valid quadruplet found within the attempt cap");
    }
    return set;
}

double mining_fraction(std::size_t epoch) {
    if (epoch < 1) throw std::domain_error("mining_fraction: epochs are 1-based");
    if (epoch <= 2) return 1.0;
    if (epoch >= 7) return 0.1;
    return 1.0 - 0.9 * static_cast<double>(epoch - 2) / 5.0;
}

} // namespace quadml
