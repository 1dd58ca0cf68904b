#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadml/data.hpp"
#include "quadml/losses.hpp"
#include "quadml/model.hpp"
#include "quadml/rng.hpp"
#include "quadml/sampling.hpp"

namespace quadml {

struct TrainConfig {
    double lr = 0.005;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t max_epochs = 20;
    std::size_t patience = 5;
    std::size_t batch_size = 64;
    std::size_t quads_per_batch = 128;
    LossConfig loss;
    SamplerConfig sampler;
    std::uint64_t seed = 0;

    /// Throws ConfigError on invalid hyperparameters.
    void validate() const;
};

struct AdamWState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step_count = 0;
};

/// One decoupled-weight-decay Adam step over named parameters, reading each
/// tensor's gradient in place:
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
/// Throws TrainingError naming the parameter on a non-finite gradient.
void adamw_step(std::vector<Model::NamedParam>& params, AdamWState& state,
                const TrainConfig& config);

struct EpochReport {
    double mean_loss = 0.0;
    std::size_t steps = 0;
};

/// ceil(N / batch_size) optimizer steps of: weighted batch, quadruplet
/// sampling, combined loss at mining_fraction(epoch), backward, AdamW.
/// Batches without a valid quadruplet are redrawn; more than 10 consecutive
/// failures raise a DataError.
EpochReport train_epoch(Model& model, const Dataset& train_data, const TrainConfig& config,
                        std::size_t epoch, Rng& sampler_rng, AdamWState& state);

struct TrainHistory {
    struct Epoch {
        std::size_t epoch = 0;
        double train_loss = 0.0;
        double val_balanced_accuracy = 0.0;
        double mining_fraction = 0.0;
        double seconds = 0.0; // wall time; reported on stdout, kept out of files
    };
    std::vector<Epoch> epochs;
    std::size_t best_epoch = 0; // 0 when no epoch ran
    double best_metric = 0.0;
};

/// Up to max_epochs with early stopping on validation balanced accuracy
/// (strict improvement, `patience` epochs of grace); the best epoch's weights
/// are restored into the model before returning.
TrainHistory fit(Model& model, const Dataset& train_data, const Dataset& val_data,
                 const TrainConfig& config);

/// Deterministic per-epoch CSV. Wall-clock timings stay out of this file so
/// reruns with the same config and seed are byte-identical.
void write_history_csv(const TrainHistory& history, const std::string& path);

} // namespace quadml
