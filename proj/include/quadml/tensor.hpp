#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace quadml {

namespace detail {
struct TensorNode;
struct NodeAccess;
} // namespace detail

/// Dense 64-bit-float tensor with reverse-mode gradient support.
///
/// A Tensor is a value-semantic handle; copies share the underlying buffer.
/// Operations on tensors record the computation so that backward() can later
/// push gradients from a scalar loss to every leaf created with
/// requires_grad=true. Gradients of leaves are zero-initialized and
/// overwritten (not accumulated) by each backward() call that reaches them.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<std::size_t> shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar_value(double value, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);
    static Tensor identity(std::size_t n);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t size() const;
    std::size_t dim(std::size_t axis) const;
    bool is_scalar() const;

    /// Value of a scalar (1-element) tensor.
    double value() const;
    /// Element (row, col) of a 2-D tensor.
    double at(std::size_t row, std::size_t col) const;

    std::span<const double> data() const;
    /// Writable view of the buffer; intended for leaf parameters only.
    std::span<double> mutable_data();

    bool requires_grad() const;
    /// Gradient buffer; all zeros until a backward pass reaches this tensor.
    std::span<const double> grad() const;

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;
    friend struct detail::NodeAccess;
};

// --- primitive operations -------------------------------------------------
// Every primitive checks its operand shapes and throws std::invalid_argument
// naming both shapes on mismatch. There is no implicit broadcasting; the only
// scalar-tensor mixtures are scale()/add_scalar(), and row vectors must go
// through the explicit add_rowvec().

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

/// x for x >= 0, slope*x below; the derivative at exactly 0 is taken as 1.
Tensor leaky_relu(const Tensor& a, double negative_slope);

/// Adds a length-n vector to every row of an [m x n] matrix.
Tensor add_rowvec(const Tensor& mat, const Tensor& row);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Row-wise softmax with max-subtraction; rows of the result sum to 1.
Tensor softmax_rows(const Tensor& logits);

Tensor log_elementwise(const Tensor& a);
Tensor pow_elementwise(const Tensor& a, double exponent);
/// max(x, lower); gradient passes through where x >= lower.
Tensor clamp_min(const Tensor& a, double lower);

/// Gathers flat indices into a 1-D tensor; backward scatter-adds.
Tensor take(const Tensor& a, std::vector<std::size_t> flat_indices);
/// Packs scalar tensors into a 1-D tensor of length n.
Tensor stack_scalars(const std::vector<Tensor>& scalars);

/// Euclidean distance between rows i and j of an [n x d] matrix.
/// At distance exactly 0 the (undefined) gradient is taken as 0.
Tensor row_distance(const Tensor& points, std::size_t i, std::size_t j);

struct BatchNormResult {
    Tensor output;
    std::vector<double> batch_mean; // per column
    std::vector<double> batch_var;  // biased, per column
};

/// Training-mode batch normalization over the rows of an [B x d] matrix with
/// per-column gamma/beta of length d. Requires B >= 2.
BatchNormResult batch_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                double eps);

/// Reverse-mode pass from a scalar loss. Walks the recorded graph once in
/// reverse topological order; gradients of every reachable tensor are zeroed
/// first, so repeated calls overwrite rather than accumulate.
void backward(const Tensor& loss);

/// Central-difference check of autodiff gradients for a scalar function of
/// the given leaf parameters. Returns the max relative error over all
/// coordinates, with denominator max(|g|, |g_fd|, 1e-8).
double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double step);

} // namespace quadml
