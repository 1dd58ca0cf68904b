#include "quadml/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace quadml {

std::size_t ConfusionMatrix::at(int true_label, int predicted) const {
    const std::size_t row = label_to_index(true_label);
    const std::size_t col = label_to_index(predicted);
    return counts[row * side() + col];
}

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          std::size_t num_classes) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("confusion: prediction and label counts differ");
    }
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(cm.side() * cm.side(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < kOutlierLabel || labels[i] >= static_cast<int>(num_classes) ||
            predictions[i] < kOutlierLabel || predictions[i] >= static_cast<int>(num_classes)) {
            throw std::out_of_range("confusion: label outside {-1..C-1} at row " +
                                    std::to_string(i));
        }
        ++cm.counts[label_to_index(labels[i]) * cm.side() + label_to_index(predictions[i])];
    }
    return cm;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw std::domain_error("classification_metrics: empty confusion matrix");
    const std::size_t side = cm.side();
    ClassificationMetrics out;
    out.per_class_recall.assign(side, -1.0);
    double recall_sum = 0.0, precision_sum = 0.0, f1_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < side; ++c) {
        std::size_t true_count = 0, pred_count = 0;
        for (std::size_t j = 0; j < side; ++j) {
            true_count += cm.counts[c * side + j];
            pred_count += cm.counts[j * side + c];
        }
        if (true_count == 0) continue;
        ++present;
        const double tp = static_cast<double>(cm.counts[c * side + c]);
        const double recall = tp / static_cast<double>(true_count);
        const double precision = pred_count == 0 ? 0.0 : tp / static_cast<double>(pred_count);
        const double f1 =
            (precision + recall) == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
        out.per_class_recall[c] = recall;
        recall_sum += recall;
        precision_sum += precision;
        f1_sum += f1;
    }
    out.balanced_accuracy = recall_sum / static_cast<double>(present);
    out.recall = out.balanced_accuracy;
    out.precision = precision_sum / static_cast<double>(present);
    out.f1 = f1_sum / static_cast<double>(present);
    return out;
}

double mean_average_precision(const std::vector<double>& probs, std::size_t num_columns,
                              const std::vector<int>& labels) {
    if (num_columns == 0 || labels.empty() || probs.size() != labels.size() * num_columns) {
        throw std::invalid_argument("mean_average_precision: shape mismatch");
    }
    const std::size_t n = labels.size();
    double ap_sum = 0.0;
    std::size_t classes_with_positives = 0;
    for (std::size_t col = 0; col < num_columns; ++col) {
        const int class_label = index_to_label(col);
        std::size_t positives = 0;
        for (int label : labels) {
            if (label == class_label) ++positives;
        }
        if (positives == 0) continue;
        ++classes_with_positives;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return probs[a * num_columns + col] > probs[b * num_columns + col];
        });
        double ap = 0.0;
        std::size_t hits = 0;
        for (std::size_t rank = 0; rank < n; ++rank) {
            if (labels[order[rank]] == class_label) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
            }
        }
        ap_sum += ap / static_cast<double>(positives);
    }
    if (classes_with_positives == 0) {
        throw std::domain_error("mean_average_precision: no positives for any class");
    }
    return ap_sum / static_cast<double>(classes_with_positives);
}

RetrievalMetrics retrieval_at_k(const std::vector<double>& embeddings, std::size_t dim,
                                const std::vector<int>& labels, std::size_t k) {
    const std::size_t n = labels.size();
    if (dim == 0 || embeddings.size() != n * dim) {
        throw std::invalid_argument("retrieval_at_k: shape mismatch");
    }
    if (k == 0 || k >= n) {
        throw std::domain_error("retrieval_at_k: k must satisfy 1 <= k < N");
    }
    double precision_sum = 0.0;
    double ap_sum = 0.0;
    std::size_t queries_with_partner = 0;
    std::vector<std::size_t> order(n);
    std::vector<double> dist_sq(n);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double diff = embeddings[q * dim + c] - embeddings[i * dim + c];
                acc += diff * diff;
            }
            dist_sq[i] = acc;
        }
        std::iota(order.begin(), order.end(), 0);
        order.erase(std::remove(order.begin(), order.end(), q), order.end());
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return dist_sq[a] < dist_sq[b];
        });

        std::size_t relevant_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i != q && labels[i] == labels[q]) ++relevant_total;
        }
        std::size_t hits = 0;
        double ap = 0.0;
        for (std::size_t rank = 0; rank < k; ++rank) {
            if (labels[order[rank]] == labels[q]) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
            }
        }
        precision_sum += static_cast<double>(hits) / static_cast<double>(k);
        if (relevant_total > 0) {
            ++queries_with_partner;
            ap_sum += ap / static_cast<double>(std::min(k, relevant_total));
        }
    }
    RetrievalMetrics out;
    out.precision_at_k = precision_sum / static_cast<double>(n);
    out.map_at_k =
        queries_with_partner == 0 ? 0.0 : ap_sum / static_cast<double>(queries_with_partner);
    return out;
}

MetricsReport evaluate(Model& model, const Dataset& dataset, std::size_t k) {
    if (dataset.size() == 0) throw std::domain_error("evaluate: empty dataset");
    model.set_mode(Mode::eval);
    Tensor features = dataset.feature_tensor();
    Tensor emb = model.embed(features);
    Tensor probs = softmax(model.classify(emb));

    const std::size_t n = dataset.size();
    const std::size_t cols = probs.dim(1);
    std::vector<int> predictions(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < cols; ++j) {
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        }
        predictions[i] = index_to_label(best);
    }

    ConfusionMatrix cm = confusion(predictions, dataset.labels, dataset.num_classes);
    ClassificationMetrics cls = classification_metrics(cm);
    std::vector<double> prob_values(probs.data().begin(), probs.data().end());
    std::vector<double> emb_values(emb.data().begin(), emb.data().end());

    MetricsReport report;
    report.balanced_accuracy = cls.balanced_accuracy;
    report.f1 = cls.f1;
    report.precision = cls.precision;
    report.recall = cls.recall;
    report.map = mean_average_precision(prob_values, cols, dataset.labels);
    RetrievalMetrics retrieval = retrieval_at_k(emb_values, model.config().embed_dim,
                                                dataset.labels, k);
    report.precision_at_k = retrieval.precision_at_k;
    report.map_at_k = retrieval.map_at_k;
    report.k = k;
    return report;
}

} // namespace quadml
