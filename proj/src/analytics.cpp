#include "quadml/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "quadml/model.hpp"

namespace quadml {

namespace {

double euclidean(const double* a, const double* b, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

std::vector<std::size_t> members_of(const std::vector<int>& labels, int class_label) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == class_label) members.push_back(i);
    }
    return members;
}

} // namespace

std::vector<double> pairwise_distances(const std::vector<double>& points, std::size_t dim) {
    if (dim == 0 || points.size() % dim != 0) {
        throw std::invalid_argument("pairwise_distances: shape mismatch");
    }
    const std::size_t n = points.size() / dim;
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = euclidean(&points[i * dim], &points[j * dim], dim);
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    return out;
}

std::vector<double> class_distances(const std::vector<double>& embeddings, std::size_t dim,
                                    const std::vector<int>& labels, int class_label,
                                    DistanceKind kind) {
    const std::vector<std::size_t> members = members_of(labels, class_label);
    std::vector<double> out;
    if (kind == DistanceKind::intra) {
        if (members.size() < 2) {
            throw std::domain_error("class_distances: class " + std::to_string(class_label) +
                                    " needs at least 2 members for intra-class distances");
        }
        out.reserve(members.size() * (members.size() - 1) / 2);
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                out.push_back(euclidean(&embeddings[members[i] * dim],
                                        &embeddings[members[j] * dim], dim));
            }
        }
        return out;
    }
    if (members.empty() || members.size() == labels.size()) {
        throw std::domain_error("class_distances: class " + std::to_string(class_label) +
                                " needs a member and a non-member for inter-class distances");
    }
    out.reserve(members.size() * (labels.size() - members.size()));
    for (std::size_t m : members) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == class_label) continue;
            out.push_back(euclidean(&embeddings[m * dim], &embeddings[i * dim], dim));
        }
    }
    return out;
}

double empirical_quantile(std::vector<double> values, double p) {
    if (values.empty()) throw std::domain_error("empirical_quantile: empty input");
    if (p < 0.0 || p > 1.0) throw std::domain_error("empirical_quantile: p outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = static_cast<double>(values.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - std::floor(h)) * (values[lo + 1] - values[lo]);
}

DistanceSummary box_stats(const std::vector<double>& values) {
    if (values.empty()) throw std::domain_error("box_stats: empty input");
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
        const double h = static_cast<double>(sorted.size() - 1) * p;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        if (lo + 1 >= sorted.size()) return sorted.back();
        return sorted[lo] + (h - std::floor(h)) * (sorted[lo + 1] - sorted[lo]);
    };
    DistanceSummary s;
    s.q025 = q(0.025);
    s.q25 = q(0.25);
    s.median = q(0.5);
    s.q75 = q(0.75);
    s.q975 = q(0.975);
    s.sample_count = values.size();
    return s;
}

double mean_distance_statistic(std::size_t x_index, const std::vector<double>& embeddings,
                               std::size_t dim, const std::vector<int>& labels, int class_label) {
    if (x_index >= labels.size()) {
        throw std::invalid_argument("mean_distance_statistic: index out of range");
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != class_label || i == x_index) continue;
        acc += euclidean(&embeddings[x_index * dim], &embeddings[i * dim], dim);
        ++count;
    }
    if (count == 0) {
        throw std::domain_error("mean_distance_statistic: class " + std::to_string(class_label) +
                                " has no members besides the sample itself");
    }
    return acc / static_cast<double>(count);
}

ErrorEstimate quantile_error_estimates(const std::vector<double>& embeddings, std::size_t dim,
                                       const std::vector<int>& labels, int class_label,
                                       double alpha, double beta) {
    if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
        throw std::domain_error("quantile_error_estimates: alpha and beta must lie in (0, 1)");
    }
    const std::vector<std::size_t> members = members_of(labels, class_label);
    const std::size_t non_member_count = labels.size() - members.size();
    if (members.size() < 20 || non_member_count < 20) {
        throw std::domain_error("quantile_error_estimates: class " + std::to_string(class_label) +
                                " needs at least 20 members and 20 non-members");
    }

    std::vector<double> member_stats;
    member_stats.reserve(members.size());
    std::vector<double> foreign_stats;
    foreign_stats.reserve(non_member_count);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double t = mean_distance_statistic(i, embeddings, dim, labels, class_label);
        if (labels[i] == class_label) {
            member_stats.push_back(t);
        } else {
            foreign_stats.push_back(t);
        }
    }

    // Accept membership iff T(x) < q: type I rejects a true member (T >= q),
    // type II accepts a foreigner (T < q).
    auto fraction_at_least = [](const std::vector<double>& values, double q) {
        std::size_t count = 0;
        for (double v : values) {
            if (v >= q) ++count;
        }
        return static_cast<double>(count) / static_cast<double>(values.size());
    };

    ErrorEstimate e;
    e.class_label = class_label;
    e.alpha = alpha;
    e.beta = beta;
    const double q_alpha = empirical_quantile(member_stats, 1.0 - alpha);
    e.type1_at_alpha = fraction_at_least(member_stats, q_alpha);
    e.type2_at_alpha = 1.0 - fraction_at_least(foreign_stats, q_alpha);
    const double q_beta = empirical_quantile(foreign_stats, beta);
    e.type1_at_beta = fraction_at_least(member_stats, q_beta);
    e.type2_at_beta = 1.0 - fraction_at_least(foreign_stats, q_beta);
    return e;
}

AnalysisReport analyze(const std::vector<double>& embeddings, std::size_t dim,
                       const std::vector<int>& labels, double alpha, double beta) {
    std::set<int> present(labels.begin(), labels.end());
    if (present.size() < 2) {
        throw std::domain_error("analyze: needs at least two distinct labels");
    }
    AnalysisReport report;
    report.alpha = alpha;
    report.beta = beta;
    std::set<int> skipped;
    for (int label : present) {
        try {
            std::vector<double> d = class_distances(embeddings, dim, labels, label,
                                                    DistanceKind::intra);
            DistanceSummary s = box_stats(d);
            s.class_label = label;
            s.kind = DistanceKind::intra;
            report.intra.push_back(s);
        } catch (const std::domain_error&) {
            skipped.insert(label);
        }
        try {
            std::vector<double> d = class_distances(embeddings, dim, labels, label,
                                                    DistanceKind::inter);
            DistanceSummary s = box_stats(d);
            s.class_label = label;
            s.kind = DistanceKind::inter;
            report.inter.push_back(s);
        } catch (const std::domain_error&) {
            skipped.insert(label);
        }
        if (label == kOutlierLabel) continue;
        try {
            report.errors.push_back(
                quantile_error_estimates(embeddings, dim, labels, label, alpha, beta));
        } catch (const std::domain_error&) {
            skipped.insert(label);
        }
    }
    report.skipped.assign(skipped.begin(), skipped.end());
    return report;
}

namespace {

std::string format_number(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

} // namespace

std::string render_boxplots(const std::vector<DistanceSummary>& summaries,
                            const std::string& title) {
    if (summaries.empty()) throw std::domain_error("render_boxplots: no summaries");
    const double width_per_box = 80.0;
    const double margin_left = 70.0, margin_right = 20.0, margin_top = 50.0, margin_bottom = 50.0;
    const double plot_height = 320.0;
    const double width = margin_left + margin_right + width_per_box * summaries.size();
    const double height = margin_top + plot_height + margin_bottom;

    double lo = summaries[0].q025, hi = summaries[0].q975;
    for (const auto& s : summaries) {
        lo = std::min(lo, s.q025);
        hi = std::max(hi, s.q975);
    }
    if (hi <= lo) hi = lo + 1.0; // degenerate: all values equal
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto y_of = [&](double v) {
        return margin_top + plot_height * (1.0 - (v - lo) / (hi - lo));
    };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "  <title>" << title << "</title>\n";
    svg << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    // axes
    svg << "  <line x1=\"" << margin_left << "\" y1=\"" << margin_top << "\" x2=\"" << margin_left
        << "\" y2=\"" << margin_top + plot_height << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << margin_left << "\" y1=\"" << margin_top + plot_height << "\" x2=\""
        << width - margin_right << "\" y2=\"" << margin_top + plot_height
        << "\" stroke=\"black\"/>\n";
    svg << "  <text x=\"16\" y=\"" << margin_top + plot_height / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << margin_top + plot_height / 2 << ")\">distance</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        const double y = y_of(v);
        svg << "  <line x1=\"" << margin_left - 4 << "\" y1=\"" << y << "\" x2=\"" << margin_left
            << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
        svg << "  <text x=\"" << margin_left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"10\">" << format_number(v) << "</text>\n";
    }

    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const DistanceSummary& s = summaries[i];
        const double cx = margin_left + width_per_box * (static_cast<double>(i) + 0.5);
        const double half = width_per_box * 0.3;
        svg << "  <g>\n";
        // whiskers
        svg << "    <line x1=\"" << cx << "\" y1=\"" << y_of(s.q975) << "\" x2=\"" << cx
            << "\" y2=\"" << y_of(s.q75) << "\" stroke=\"black\"/>\n";
        svg << "    <line x1=\"" << cx << "\" y1=\"" << y_of(s.q25) << "\" x2=\"" << cx
            << "\" y2=\"" << y_of(s.q025) << "\" stroke=\"black\"/>\n";
        svg << "    <line x1=\"" << cx - half / 2 << "\" y1=\"" << y_of(s.q975) << "\" x2=\""
            << cx + half / 2 << "\" y2=\"" << y_of(s.q975) << "\" stroke=\"black\"/>\n";
        svg << "    <line x1=\"" << cx - half / 2 << "\" y1=\"" << y_of(s.q025) << "\" x2=\""
            << cx + half / 2 << "\" y2=\"" << y_of(s.q025) << "\" stroke=\"black\"/>\n";
        // box and median
        svg << "    <rect x=\"" << cx - half << "\" y=\"" << y_of(s.q75) << "\" width=\""
            << 2 * half << "\" height=\"" << std::max(0.0, y_of(s.q25) - y_of(s.q75))
            << "\" fill=\"none\" stroke=\"black\"/>\n";
        svg << "    <line x1=\"" << cx - half << "\" y1=\"" << y_of(s.median) << "\" x2=\""
            << cx + half << "\" y2=\"" << y_of(s.median)
            << "\" stroke=\"orange\" stroke-width=\"2\"/>\n";
        svg << "    <text x=\"" << cx << "\" y=\"" << margin_top + plot_height + 20
            << "\" text-anchor=\"middle\" font-size=\"12\">" << s.class_label << "</text>\n";
        svg << "  </g>\n";
    }
    svg << "  <text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">class</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace quadml
