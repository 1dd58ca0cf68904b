#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quadml/tensor.hpp"

namespace quadml {

/// Label reserved for objects foreign to the task.
inline constexpr int kOutlierLabel = -1;

/// Softmax index 0 is the outlier class; index i (1 <= i <= C) is class i-1.
/// Keeping the outlier slot first makes its position stable as C varies.
inline int index_to_label(std::size_t index) { return static_cast<int>(index) - 1; }
inline std::size_t label_to_index(int label) { return static_cast<std::size_t>(label + 1); }

struct ModelConfig {
    std::size_t input_dim = 0;              // D
    std::size_t embed_dim = 8;              // d
    std::size_t num_classes = 0;            // C (labeled classes, outliers excluded)
    std::vector<std::size_t> backbone_hidden = {64};
    double leaky_slope = 0.01;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
    std::uint64_t seed = 0;
};

/// Non-fatal configuration notes; construction prints them to stderr.
std::vector<std::string> config_warnings(const ModelConfig& config);

enum class Mode { train, eval };

struct LinearLayer {
    Tensor weight; // [in x out]
    Tensor bias;   // [out]
};

/// Embedding network (inputs -> R^d) plus a two-layer classifier head
/// (R^d -> R^(C+1)): linear d->d, batch normalization, leaky ReLU,
/// linear d->(C+1).
class Model {
public:
    explicit Model(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }
    Mode mode() const { return mode_; }
    void set_mode(Mode mode) { mode_ = mode; }

    /// [B x D] -> [B x d]; differentiable.
    Tensor embed(const Tensor& batch);
    /// [B x d] -> [B x (C+1)] logits. Train mode uses batch statistics and
    /// updates the running buffers; eval mode uses running statistics only.
    Tensor classify(const Tensor& embeddings);
    /// argmax of softmax(classify(embed(batch))) mapped to labels in
    /// {-1, 0..C-1}; ties break toward the lowest softmax index.
    std::vector<int> predict(const Tensor& batch);

    struct NamedParam {
        std::string name;
        Tensor tensor;
    };
    /// Trainable parameters in declaration order.
    std::vector<NamedParam> parameters();

    const std::vector<double>& running_mean() const { return running_mean_; }
    const std::vector<double>& running_var() const { return running_var_; }

    /// Full mutable state (parameters + batch-norm buffers) for best-epoch
    /// checkpointing; restore is exact.
    std::vector<std::vector<double>> snapshot_state() const;
    void restore_state(const std::vector<std::vector<double>>& state);

    /// Versioned binary checkpoint (magic "QNM1", little-endian).
    void save(const std::string& path) const;
    static Model load(const std::string& path);

private:
    ModelConfig config_;
    Mode mode_ = Mode::eval;
    std::vector<LinearLayer> backbone_;
    LinearLayer head_in_;   // d -> d
    Tensor bn_gamma_;       // [d]
    Tensor bn_beta_;        // [d]
    std::vector<double> running_mean_;
    std::vector<double> running_var_;
    LinearLayer head_out_;  // d -> C+1

    Tensor apply_batch_norm(const Tensor& x);
};

/// Row-wise softmax, re-exported next to the model it belongs with.
Tensor softmax(const Tensor& logits);

} // namespace quadml
