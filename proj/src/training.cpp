#include "quadml/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "quadml/errors.hpp"
#include "quadml/evaluation.hpp"

namespace quadml {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ConfigError("train: beta1 and beta2 must lie in [0, 1)");
    }
    if (adam_eps <= 0.0) throw ConfigError("train: adam_eps must be positive");
    if (patience < 1) throw ConfigError("train: patience must be at least 1");
    if (batch_size < 4) throw ConfigError("train: batch_size must be at least 4");
    if (quads_per_batch < 1) throw ConfigError("train: quads_per_batch must be at least 1");
    if (!(sampler.outlier_share > 0.0 && sampler.outlier_share < 1.0)) {
        throw ConfigError("train: sampler.outlier_share must lie in (0, 1)");
    }
}

void adamw_step(std::vector<Model::NamedParam>& params, AdamWState& state,
                const TrainConfig& config) {
    if (state.first_moment.empty()) {
        for (auto& param : params) {
            state.first_moment.emplace_back(param.tensor.size(), 0.0);
            state.second_moment.emplace_back(param.tensor.size(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw std::invalid_argument("adamw_step: optimizer state does not match parameter list");
    }
    ++state.step_count;
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step_count));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p].tensor.mutable_data();
        auto grads = params[p].tensor.grad();
        auto& m = state.first_moment[p];
        auto& v = state.second_moment[p];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grads[i];
            if (!std::isfinite(g)) {
                throw TrainingError("adamw_step: non-finite gradient in parameter '" +
                                    params[p].name + "'");
            }
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / bias1;
            const double v_hat = v[i] / bias2;
            values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.adam_eps) +
                         config.lr * config.weight_decay * values[i];
        }
    }
}

namespace {

void check_trainable(const Dataset& data) {
    std::map<int, std::size_t> counts;
    for (int label : data.labels) ++counts[label];
    std::size_t rich_classes = 0;
    for (const auto& [label, count] : counts) {
        if (label != kOutlierLabel && count >= 2) ++rich_classes;
    }
    if (rich_classes < 2 || counts.size() < 3) {
        throw DataError("train: dataset needs two labeled classes with two samples each plus at "
                        "least one further label to form quadruplets");
    }
}

std::vector<int> labels_for(const Dataset& data, const std::vector<std::size_t>& rows) {
    std::vector<int> labels(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = data.labels[rows[i]];
    return labels;
}

Tensor gather_features(const Dataset& data, const std::vector<std::size_t>& rows) {
    std::vector<double> values;
    values.reserve(rows.size() * data.feature_dim);
    for (std::size_t row : rows) {
        values.insert(values.end(),
                      data.features.begin() + static_cast<std::ptrdiff_t>(row * data.feature_dim),
                      data.features.begin() +
                          static_cast<std::ptrdiff_t>((row + 1) * data.feature_dim));
    }
    return Tensor::from_values({rows.size(), data.feature_dim}, std::move(values));
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

EpochReport train_epoch(Model& model, const Dataset& train_data, const TrainConfig& config,
                        std::size_t epoch, Rng& sampler_rng, AdamWState& state) {
    config.validate();
    check_trainable(train_data);
    if (model.mode() != Mode::train) model.set_mode(Mode::train);

    const ClassIndex index = ClassIndex::build(train_data.labels);
    const auto weights =
        class_sampling_weights(train_data.num_classes, config.sampler.outlier_share);
    const double fraction = mining_fraction(epoch);
    const std::size_t steps =
        (train_data.size() + config.batch_size - 1) / config.batch_size;

    auto params = model.parameters();
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
        std::vector<std::size_t> rows;
        std::vector<int> batch_labels;
        QuadrupletSet quads;
        std::size_t failures = 0;
        for (;;) {
            rows = sample_batch(index, weights, config.batch_size, sampler_rng);
            batch_labels = labels_for(train_data, rows);
            try {
                quads = sample_quadruplets(batch_labels, config.quads_per_batch, sampler_rng);
                break;
            } catch (const DataError&) {
                if (++failures > 10) {
                    throw DataError("train: more than 10 consecutive batches without a valid "
                                    "quadruplet; check class balance and batch size");
                }
            }
        }

        Tensor features = gather_features(train_data, rows);
        Tensor embeddings = model.embed(features);
        Tensor probs = softmax(model.classify(embeddings));
        std::vector<std::size_t> targets(batch_labels.size());
        for (std::size_t i = 0; i < batch_labels.size(); ++i) {
            targets[i] = label_to_index(batch_labels[i]);
        }
        Tensor loss = combined_loss(embeddings, quads, probs, targets, config.loss, fraction,
                                    train_data.num_classes);
        const double loss_value = loss.value();
        if (!std::isfinite(loss_value)) {
            throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                ", step " + std::to_string(step + 1));
        }
        backward(loss);
        adamw_step(params, state, config);
        loss_sum += loss_value;
    }
    return {loss_sum / static_cast<double>(steps), steps};
}

TrainHistory fit(Model& model, const Dataset& train_data, const Dataset& val_data,
                 const TrainConfig& config) {
    config.validate();
    TrainHistory history;
    if (config.max_epochs == 0) return history;
    check_trainable(train_data);
    if (val_data.size() == 0) throw DataError("fit: empty validation set");

    Rng sampler_rng(config.sampler.seed);
    AdamWState state;
    std::vector<std::vector<double>> best_state;
    std::size_t epochs_without_improvement = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        EpochReport report = train_epoch(model, train_data, config, epoch, sampler_rng, state);

        model.set_mode(Mode::eval);
        std::vector<int> predictions = model.predict(val_data.feature_tensor());
        ConfusionMatrix cm = confusion(predictions, val_data.labels, val_data.num_classes);
        const double val_ba = classification_metrics(cm).balanced_accuracy;
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        history.epochs.push_back(
            {epoch, report.mean_loss, val_ba, mining_fraction(epoch), seconds});
        std::cout << "epoch " << epoch << ": loss " << report.mean_loss << ", val balanced acc "
                  << val_ba << " (" << seconds << " s)\n";

        if (history.best_epoch == 0 || val_ba > history.best_metric) {
            history.best_epoch = epoch;
            history.best_metric = val_ba;
            best_state = model.snapshot_state();
            epochs_without_improvement = 0;
        } else if (++epochs_without_improvement >= config.patience) {
            break;
        }
    }
    if (!best_state.empty()) model.restore_state(best_state);
    model.set_mode(Mode::eval);
    return history;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("write_history_csv: cannot open '" + path + "' for writing");
    out << "epoch,train_loss,val_balanced_accuracy,mining_fraction\n";
    for (const auto& e : history.epochs) {
        out << e.epoch << "," << format_double(e.train_loss) << ","
            << format_double(e.val_balanced_accuracy) << "," << format_double(e.mining_fraction)
            << "\n";
    }
    if (!out) throw ConfigError("write_history_csv: write to '" + path + "' failed");
}

} // namespace quadml
