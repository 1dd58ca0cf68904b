#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace quadml {

enum class DistanceKind { intra, inter };

struct DistanceSummary {
    int class_label = 0;
    DistanceKind kind = DistanceKind::intra;
    double q025 = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double q975 = 0.0;
    std::size_t sample_count = 0;
};

/// Per-class type I/II error probabilities of the mean-distance quantile
/// classifier: the first pair anchors the threshold at the (1-alpha) quantile
/// of member statistics, the second at the beta quantile of non-member
/// statistics. The decision rule accepts membership iff T(x) < q.
struct ErrorEstimate {
    int class_label = 0;
    double type1_at_alpha = 0.0;
    double type2_at_alpha = 0.0;
    double type1_at_beta = 0.0;
    double type2_at_beta = 0.0;
    double alpha = 0.025;
    double beta = 0.025;
};

/// Symmetric [N x N] Euclidean distance matrix; each pair computed once.
std::vector<double> pairwise_distances(const std::vector<double>& points, std::size_t dim);

/// intra: all unordered within-class pair distances. inter: all distances
/// from class members to every sample of any other label (outliers included).
std::vector<double> class_distances(const std::vector<double>& embeddings, std::size_t dim,
                                    const std::vector<int>& labels, int class_label,
                                    DistanceKind kind);

/// Empirical quantile by linear interpolation on order statistics,
/// h = (n-1)p. Input need not be sorted.
double empirical_quantile(std::vector<double> values, double p);

/// Quantile block at p in {0.025, 0.25, 0.5, 0.75, 0.975}.
DistanceSummary box_stats(const std::vector<double>& values);

/// T(x): mean Euclidean distance from sample x to the members of the class,
/// excluding x itself when it belongs to it.
double mean_distance_statistic(std::size_t x_index, const std::vector<double>& embeddings,
                               std::size_t dim, const std::vector<int>& labels, int class_label);

/// Requires >= 20 members and >= 20 non-members.
ErrorEstimate quantile_error_estimates(const std::vector<double>& embeddings, std::size_t dim,
                                       const std::vector<int>& labels, int class_label,
                                       double alpha, double beta);

struct AnalysisReport {
    std::vector<DistanceSummary> intra;  // by ascending label
    std::vector<DistanceSummary> inter;  // by ascending label
    std::vector<ErrorEstimate> errors;   // non-outlier classes passing the guard
    std::vector<int> skipped;            // labels that failed a guard somewhere
    double alpha = 0.025;
    double beta = 0.025;
};

AnalysisReport analyze(const std::vector<double>& embeddings, std::size_t dim,
                       const std::vector<int>& labels, double alpha, double beta);

/// Box-and-whisker chart (SVG 1.1): box between q25 and q75, median line,
/// whiskers to q025/q975, one group per summary in document order.
std::string render_boxplots(const std::vector<DistanceSummary>& summaries,
                            const std::string& title);

} // namespace quadml
