#pragma once

#include <cstddef>
#include <vector>

#include "quadml/data.hpp"
#include "quadml/model.hpp"

namespace quadml {

/// (C+1) x (C+1) counts; rows are true labels, columns predictions, both
/// ordered (-1, 0, ..., C-1).
struct ConfusionMatrix {
    std::size_t num_classes = 0; // C
    std::vector<std::size_t> counts;

    std::size_t side() const { return num_classes + 1; }
    std::size_t at(int true_label, int predicted) const;
    std::size_t total() const;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          std::size_t num_classes);

struct ClassificationMetrics {
    double balanced_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    /// Per-class recall in label order (-1 first); -1 marks classes with no
    /// true samples.
    std::vector<double> per_class_recall;
};

/// Macro averages over the classes that have at least one true sample.
/// An empty per-class precision denominator counts as 0.
ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

/// Mean over classes (with >= 1 positive) of average precision when ranking
/// all samples by that class's probability, ties broken by ascending index.
double mean_average_precision(const std::vector<double>& probs, std::size_t num_columns,
                              const std::vector<int>& labels);

struct RetrievalMetrics {
    double precision_at_k = 0.0;
    double map_at_k = 0.0;
};

/// Neighbor metrics over Euclidean distances; each query's own row is
/// excluded and ties break by ascending index. AP@k is normalized by
/// min(k, R_q); queries without any same-label partner are skipped for mAP@k.
RetrievalMetrics retrieval_at_k(const std::vector<double>& embeddings, std::size_t dim,
                                const std::vector<int>& labels, std::size_t k);

struct MetricsReport {
    double balanced_accuracy = 0.0;
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double map = 0.0;
    double precision_at_k = 0.0;
    double map_at_k = 0.0;
    std::size_t k = 10;
};

/// Runs the model once in eval mode and assembles the full suite.
MetricsReport evaluate(Model& model, const Dataset& dataset, std::size_t k);

} // namespace quadml
