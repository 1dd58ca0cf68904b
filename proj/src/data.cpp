#include "quadml/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "quadml/errors.hpp"
#include "quadml/model.hpp"
#include "quadml/rng.hpp"

namespace quadml {

namespace {

constexpr char kMagic[4] = {'Q', 'N', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& what) {
    throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& text, const std::string& path, std::size_t line_no) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) parse_fail(path, line_no, "bad number '" + text + "'");
    if (!std::isfinite(value)) parse_fail(path, line_no, "non-finite value '" + text + "'");
    return value;
}

long parse_int(const std::string& text, const std::string& path, std::size_t line_no) {
    long value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) parse_fail(path, line_no, "bad integer '" + text + "'");
    return value;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError(path + ": unexpected end of file");
    return value;
}

} // namespace

Tensor Dataset::feature_tensor() const {
    return Tensor::from_values({size(), feature_dim}, features);
}

Tensor Dataset::row_tensor(std::size_t row) const {
    std::vector<double> values(features.begin() + static_cast<std::ptrdiff_t>(row * feature_dim),
                               features.begin() +
                                   static_cast<std::ptrdiff_t>((row + 1) * feature_dim));
    return Tensor::from_values({1, feature_dim}, std::move(values));
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.feature_dim = feature_dim;
    out.num_classes = num_classes;
    out.features.reserve(rows.size() * feature_dim);
    out.labels.reserve(rows.size());
    out.ids.reserve(rows.size());
    for (std::size_t row : rows) {
        out.features.insert(out.features.end(),
                            features.begin() + static_cast<std::ptrdiff_t>(row * feature_dim),
                            features.begin() + static_cast<std::ptrdiff_t>((row + 1) * feature_dim));
        out.labels.push_back(labels[row]);
        out.ids.push_back(ids[row]);
    }
    return out;
}

void Dataset::validate() const {
    if (labels.size() != ids.size() || features.size() != labels.size() * feature_dim) {
        throw DataError("dataset: feature/label/id counts disagree");
    }
    int max_label = kOutlierLabel;
    for (int label : labels) {
        if (label < kOutlierLabel) throw DataError("dataset: label below -1");
        if (label >= static_cast<int>(num_classes)) {
            throw DataError("dataset: label " + std::to_string(label) + " outside num_classes " +
                            std::to_string(num_classes));
        }
        max_label = std::max(max_label, label);
    }
    if (max_label >= 0 && static_cast<int>(num_classes) != max_label + 1) {
        throw DataError("dataset: num_classes must equal 1 + max non-outlier label");
    }
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv: cannot open '" + path + "'");
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    ++line_no;
    const auto header = split_fields(line);
    if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
        parse_fail(path, line_no, "header must be id,label,f0,...");
    }
    ds.feature_dim = header.size() - 2;
    for (std::size_t j = 0; j < ds.feature_dim; ++j) {
        if (header[j + 2] != "f" + std::to_string(j)) {
            parse_fail(path, line_no, "unexpected feature column '" + header[j + 2] + "'");
        }
    }
    int max_label = kOutlierLabel;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != ds.feature_dim + 2) {
            parse_fail(path, line_no,
                       "expected " + std::to_string(ds.feature_dim + 2) + " fields, got " +
                           std::to_string(fields.size()));
        }
        const long label = parse_int(fields[1], path, line_no);
        if (label < kOutlierLabel) parse_fail(path, line_no, "label below -1");
        ds.ids.push_back(fields[0]);
        ds.labels.push_back(static_cast<int>(label));
        max_label = std::max(max_label, static_cast<int>(label));
        for (std::size_t j = 0; j < ds.feature_dim; ++j) {
            ds.features.push_back(parse_double(fields[j + 2], path, line_no));
        }
    }
    if (ds.labels.empty()) throw DataError(path + ": no data rows");
    ds.num_classes = max_label >= 0 ? static_cast<std::size_t>(max_label) + 1 : 0;
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("save_csv: cannot open '" + path + "' for writing");
    out << "id,label";
    for (std::size_t j = 0; j < ds.feature_dim; ++j) out << ",f" << j;
    out << "\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.ids[i] << "," << ds.labels[i];
        for (std::size_t j = 0; j < ds.feature_dim; ++j) {
            out << "," << format_double(ds.features[i * ds.feature_dim + j]);
        }
        out << "\n";
    }
    if (!out) throw ConfigError("save_csv: write to '" + path + "' failed");
}

Dataset load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_binary: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError(path + ": not a packed dataset (bad magic)");
    }
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != kVersion) throw DataError(path + ": unsupported version");
    Dataset ds;
    const auto n = read_pod<std::uint64_t>(in, path);
    ds.feature_dim = read_pod<std::uint64_t>(in, path);
    const auto c = read_pod<std::int64_t>(in, path);
    if (c < 0) throw DataError(path + ": negative class count");
    ds.num_classes = static_cast<std::size_t>(c);
    ds.labels.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        ds.labels[i] = static_cast<int>(read_pod<std::int64_t>(in, path));
    }
    ds.features.resize(n * ds.feature_dim);
    in.read(reinterpret_cast<char*>(ds.features.data()),
            static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    if (!in) throw DataError(path + ": unexpected end of file");
    ds.ids.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) ds.ids[i] = std::to_string(i);
    ds.validate();
    return ds;
}

void save_binary(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("save_binary: cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(ds.size()));
    write_pod(out, static_cast<std::uint64_t>(ds.feature_dim));
    write_pod(out, static_cast<std::int64_t>(ds.num_classes));
    for (int label : ds.labels) write_pod(out, static_cast<std::int64_t>(label));
    out.write(reinterpret_cast<const char*>(ds.features.data()),
              static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    if (!out) throw ConfigError("save_binary: write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return load_csv(path);
    return load_binary(path);
}

namespace {

// Largest-remainder allocation of n items to the three ratios; sizes sum to n
// and each stays within one item of n * ratio.
std::array<std::size_t, 3> allocate_counts(std::size_t n, const SplitRatios& ratios) {
    const double parts[3] = {ratios.train, ratios.val, ratios.test};
    std::array<std::size_t, 3> counts{};
    double fractional[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double exact = static_cast<double>(n) * parts[k];
        counts[k] = static_cast<std::size_t>(std::floor(exact));
        fractional[k] = exact - std::floor(exact);
        assigned += counts[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fractional[a] > fractional[b]; });
    for (std::size_t extra = 0; extra < n - assigned; ++extra) {
        ++counts[order[extra % 3]];
    }
    return counts;
}

} // namespace

SplitResult split(const Dataset& ds, const SplitRatios& ratios, std::uint64_t seed,
                  bool stratified) {
    if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0) {
        throw ConfigError("split: ratios must all be positive");
    }
    if (std::fabs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw ConfigError("split: ratios must sum to 1");
    }
    Rng rng(seed);
    std::vector<std::size_t> train_rows, val_rows, test_rows;
    auto shuffle = [&rng](std::vector<std::size_t>& rows) {
        for (std::size_t i = rows.size(); i > 1; --i) {
            std::swap(rows[i - 1], rows[rng.uniform_index(i)]);
        }
    };
    auto assign = [&](std::vector<std::size_t>& rows) {
        shuffle(rows);
        const auto counts = allocate_counts(rows.size(), ratios);
        std::size_t pos = 0;
        train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + counts[0]);
        pos += counts[0];
        val_rows.insert(val_rows.end(), rows.begin() + pos, rows.begin() + pos + counts[1]);
        pos += counts[1];
        test_rows.insert(test_rows.end(), rows.begin() + pos, rows.end());
    };

    if (stratified) {
        std::map<int, std::vector<std::size_t>> strata;
        for (std::size_t i = 0; i < ds.size(); ++i) strata[ds.labels[i]].push_back(i);
        for (auto& [label, rows] : strata) {
            if (rows.size() < 3) {
                throw DataError("split: stratum for label " + std::to_string(label) +
                                " has fewer than 3 samples");
            }
            assign(rows);
        }
    } else {
        std::vector<std::size_t> rows(ds.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        assign(rows);
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {ds.subset(train_rows), ds.subset(val_rows), ds.subset(test_rows)};
}

namespace {

double squared_distance(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - b[k];
        acc += diff * diff;
    }
    return acc;
}

std::vector<double> draw_centers(const SynthConfig& config, Rng& rng) {
    const std::size_t c = config.num_classes, d = config.feature_dim;
    const double min_sep = config.min_center_separation * config.cluster_sigma;
    // Spread scales with C so low-dimensional configurations stay feasible;
    // rescale upward when a draw collides.
    double spread = min_sep * static_cast<double>(std::max<std::size_t>(c, 2));
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> centers(c * d);
        for (double& v : centers) v = rng.normal(0.0, spread);
        bool ok = true;
        for (std::size_t i = 0; i < c && ok; ++i) {
            for (std::size_t j = i + 1; j < c; ++j) {
                if (squared_distance(&centers[i * d], &centers[j * d], d) < min_sep * min_sep) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) return centers;
        spread *= 1.5;
    }
    throw DataError("generate_synthetic: could not place cluster centers at the requested "
                    "separation");
}

} // namespace

Dataset generate_synthetic(const SynthConfig& config) {
    if (config.num_classes < 1 || config.samples_per_class < 1 || config.feature_dim < 1) {
        throw ConfigError("generate_synthetic: counts and dimensions must be at least 1");
    }
    if (config.min_center_separation <= 0.0 || config.cluster_sigma <= 0.0) {
        throw ConfigError("generate_synthetic: sigma and separation must be positive");
    }
    Rng rng(config.seed);
    const std::size_t c = config.num_classes, d = config.feature_dim;
    const std::vector<double> centers = draw_centers(config, rng);

    Dataset ds;
    ds.feature_dim = d;
    ds.num_classes = c;
    const std::size_t n = c * config.samples_per_class + config.outlier_count;
    ds.features.reserve(n * d);
    ds.labels.reserve(n);
    ds.ids.reserve(n);

    for (std::size_t cls = 0; cls < c; ++cls) {
        for (std::size_t s = 0; s < config.samples_per_class; ++s) {
            for (std::size_t k = 0; k < d; ++k) {
                ds.features.push_back(centers[cls * d + k] +
                                      rng.normal(0.0, config.cluster_sigma));
            }
            ds.labels.push_back(static_cast<int>(cls));
        }
    }

    // Bounding box of the centers, padded so uniform outliers can also land
    // between and around the clusters.
    std::vector<double> lo(d, std::numeric_limits<double>::max());
    std::vector<double> hi(d, std::numeric_limits<double>::lowest());
    for (std::size_t cls = 0; cls < c; ++cls) {
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], centers[cls * d + k]);
            hi[k] = std::max(hi[k], centers[cls * d + k]);
        }
    }
    const double pad = 8.0 * config.cluster_sigma;
    const double exclusion = 3.0 * config.cluster_sigma;

    auto outside_all_clusters = [&](const double* point) {
        for (std::size_t cls = 0; cls < c; ++cls) {
            if (squared_distance(point, &centers[cls * d], d) <= exclusion * exclusion) {
                return false;
            }
        }
        return true;
    };

    std::vector<double> point(d);
    for (std::size_t o = 0; o < config.outlier_count; ++o) {
        bool placed = false;
        for (int attempt = 0; attempt < 10000; ++attempt) {
            if (config.outlier_law == OutlierLaw::uniform_box) {
                for (std::size_t k = 0; k < d; ++k) {
                    point[k] = rng.uniform(lo[k] - pad, hi[k] + pad);
                }
            } else {
                const std::size_t cls = rng.uniform_index(c);
                // Random direction at a radius past the exclusion ball.
                double norm_sq = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    point[k] = rng.normal(0.0, 1.0);
                    norm_sq += point[k] * point[k];
                }
                const double radius =
                    config.cluster_sigma * (4.0 + std::fabs(rng.normal(0.0, 2.0)));
                const double scale_by = radius / std::sqrt(std::max(norm_sq, 1e-300));
                for (std::size_t k = 0; k < d; ++k) {
                    point[k] = centers[cls * d + k] + point[k] * scale_by;
                }
            }
            if (outside_all_clusters(point.data())) {
                placed = true;
                break;
            }
        }
        if (!placed) {
            throw DataError("generate_synthetic: could not place an outlier outside every "
                            "cluster's 3-sigma ball");
        }
        ds.features.insert(ds.features.end(), point.begin(), point.end());
        ds.labels.push_back(kOutlierLabel);
    }

    for (std::size_t i = 0; i < ds.labels.size(); ++i) ds.ids.push_back(std::to_string(i));
    ds.validate();
    return ds;
}

} // namespace quadml
