#include "quadml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace quadml {

namespace detail {

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;

    std::size_t size() const { return values.size(); }
};

struct NodeAccess {
    static const std::shared_ptr<TensorNode>& node(const Tensor& t) { return t.node_; }
    static Tensor wrap(std::shared_ptr<TensorNode> node) { return Tensor(std::move(node)); }
};

} // namespace detail

using detail::NodeAccess;
using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

namespace {

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out << "x";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor shape has a zero dimension");
        n *= d;
    }
    return n;
}

const NodePtr& require_node(const Tensor& t) {
    const NodePtr& node = NodeAccess::node(t);
    if (!node) throw std::invalid_argument("operation on an undefined tensor");
    return node;
}

NodePtr make_leaf(std::vector<std::size_t> shape, std::vector<double> values, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(node->values.size(), 0.0);
    return node;
}

// Result node of a primitive op. Parents and the backprop hook are kept only
// when some input actually requires gradients; otherwise the result is a
// plain constant and the graph ends here.
NodePtr make_result(std::vector<std::size_t> shape, std::vector<double> values,
                    std::vector<NodePtr> parents, std::function<void(TensorNode&)> backprop) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    bool any_grad = false;
    for (const NodePtr& p : parents) {
        if (p->requires_grad) {
            any_grad = true;
            break;
        }
    }
    if (any_grad) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    return node;
}

void check_same_shape(const TensorNode& a, const TensorNode& b, const char* op) {
    if (a.shape != b.shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_string(a.shape) + " vs " + shape_string(b.shape));
    }
}

} // namespace

// --- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return NodeAccess::wrap(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return NodeAccess::wrap(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_values(std::vector<std::size_t> shape, std::vector<double> values,
                           bool requires_grad) {
    if (shape_product(shape) != values.size()) {
        throw std::invalid_argument("from_values: shape " + shape_string(shape) + " needs " +
                                    std::to_string(shape_product(shape)) + " values, got " +
                                    std::to_string(values.size()));
    }
    return NodeAccess::wrap(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar_value(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
    return from_values({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
    return from_values({n, n}, std::move(values), false);
}

const std::vector<std::size_t>& Tensor::shape() const { return require_node(*this)->shape; }

std::size_t Tensor::size() const { return require_node(*this)->size(); }

std::size_t Tensor::dim(std::size_t axis) const {
    const NodePtr& node = require_node(*this);
    if (axis >= node->shape.size()) {
        throw std::invalid_argument("dim: axis " + std::to_string(axis) + " out of range for " +
                                    shape_string(node->shape));
    }
    return node->shape[axis];
}

bool Tensor::is_scalar() const { return require_node(*this)->size() == 1; }

double Tensor::value() const {
    const NodePtr& node = require_node(*this);
    if (node->size() != 1) {
        throw std::invalid_argument("value: tensor " + shape_string(node->shape) +
                                    " is not a scalar");
    }
    return node->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    const NodePtr& node = require_node(*this);
    if (node->shape.size() != 2) {
        throw std::invalid_argument("at: tensor " + shape_string(node->shape) + " is not 2-D");
    }
    if (row >= node->shape[0] || col >= node->shape[1]) {
        throw std::invalid_argument("at: index out of range");
    }
    return node->values[row * node->shape[1] + col];
}

std::span<const double> Tensor::data() const {
    const NodePtr& node = require_node(*this);
    return {node->values.data(), node->values.size()};
}

std::span<double> Tensor::mutable_data() {
    const NodePtr& node = require_node(*this);
    return {node->values.data(), node->values.size()};
}

bool Tensor::requires_grad() const { return require_node(*this)->requires_grad; }

std::span<const double> Tensor::grad() const {
    const NodePtr& node = require_node(*this);
    if (node->grad.size() != node->size()) {
        node->grad.assign(node->size(), 0.0);
    }
    return {node->grad.data(), node->grad.size()};
}

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const NodePtr& na = require_node(a);
    const NodePtr& nb = require_node(b);
    if (na->shape.size() != 2 || nb->shape.size() != 2) {
        throw std::invalid_argument("matmul: needs 2-D operands, got " + shape_string(na->shape) +
                                    " and " + shape_string(nb->shape));
    }
    const std::size_t m = na->shape[0], k = na->shape[1];
    const std::size_t k2 = nb->shape[0], n = nb->shape[1];
    if (k != k2) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_string(na->shape) +
                                    " vs " + shape_string(nb->shape));
    }
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double alv = na->values[i * k + l];
            if (alv == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] += alv * nb->values[l * n + j];
            }
        }
    }
    auto node = make_result({m, n}, std::move(out), {na, nb}, [na, nb, m, k, n](TensorNode& self) {
        if (na->requires_grad) {
            // dA = dY * B^T
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t l = 0; l < k; ++l) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        acc += self.grad[i * n + j] * nb->values[l * n + j];
                    }
                    na->grad[i * k + l] += acc;
                }
            }
        }
        if (nb->requires_grad) {
            // dB = A^T * dY
            for (std::size_t l = 0; l < k; ++l) {
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        acc += na->values[i * k + l] * self.grad[i * n + j];
                    }
                    nb->grad[l * n + j] += acc;
                }
            }
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor add(const Tensor& a, const Tensor& b) {
    const NodePtr& na = require_node(a);
    const NodePtr& nb = require_node(b);
    check_same_shape(*na, *nb, "add");
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] + nb->values[i];
    auto node = make_result(na->shape, std::move(out), {na, nb}, [na, nb](TensorNode& self) {
        if (na->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) na->grad[i] += self.grad[i];
        }
        if (nb->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) nb->grad[i] += self.grad[i];
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const NodePtr& na = require_node(a);
    const NodePtr& nb = require_node(b);
    check_same_shape(*na, *nb, "sub");
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] - nb->values[i];
    auto node = make_result(na->shape, std::move(out), {na, nb}, [na, nb](TensorNode& self) {
        if (na->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) na->grad[i] += self.grad[i];
        }
        if (nb->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) nb->grad[i] -= self.grad[i];
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const NodePtr& na = require_node(a);
    const NodePtr& nb = require_node(b);
    check_same_shape(*na, *nb, "mul");
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] * nb->values[i];
    auto node = make_result(na->shape, std::move(out), {na, nb}, [na, nb](TensorNode& self) {
        if (na->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) na->grad[i] += self.grad[i] * nb->values[i];
        }
        if (nb->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) nb->grad[i] += self.grad[i] * na->values[i];
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor scale(const Tensor& a, double factor) {
    const NodePtr& na = require_node(a);
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] * factor;
    auto node = make_result(na->shape, std::move(out), {na}, [na, factor](TensorNode& self) {
        for (std::size_t i = 0; i < self.size(); ++i) na->grad[i] += self.grad[i] * factor;
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor add_scalar(const Tensor& a, double value) {
    const NodePtr& na = require_node(a);
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] + value;
    auto node = make_result(na->shape, std::move(out), {na}, [na](TensorNode& self) {
        for (std::size_t i = 0; i < self.size(); ++i) na->grad[i] += self.grad[i];
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
    const NodePtr& na = require_node(a);
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = na->values[i];
        out[i] = x >= 0.0 ? x : negative_slope * x;
    }
    auto node = make_result(na->shape, std::move(out), {na}, [na, negative_slope](TensorNode& self) {
        for (std::size_t i = 0; i < self.size(); ++i) {
            na->grad[i] += self.grad[i] * (na->values[i] >= 0.0 ? 1.0 : negative_slope);
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor add_rowvec(const Tensor& mat, const Tensor& row) {
    const NodePtr& nm = require_node(mat);
    const NodePtr& nr = require_node(row);
    if (nm->shape.size() != 2 || nr->shape.size() != 1 || nr->shape[0] != nm->shape[1]) {
        throw std::invalid_argument("add_rowvec: expected [m x n] and [n], got " +
                                    shape_string(nm->shape) + " and " + shape_string(nr->shape));
    }
    const std::size_t m = nm->shape[0], n = nm->shape[1];
    std::vector<double> out(nm->size());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = nm->values[i * n + j] + nr->values[j];
        }
    }
    auto node = make_result(nm->shape, std::move(out), {nm, nr}, [nm, nr, m, n](TensorNode& self) {
        if (nm->requires_grad) {
            for (std::size_t i = 0; i < self.size(); ++i) nm->grad[i] += self.grad[i];
        }
        if (nr->requires_grad) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    nr->grad[j] += self.grad[i * n + j];
                }
            }
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor sum(const Tensor& a) {
    const NodePtr& na = require_node(a);
    if (na->size() == 0) throw std::domain_error("sum: empty tensor");
    double acc = 0.0;
    for (double v : na->values) acc += v;
    auto node = make_result({1}, {acc}, {na}, [na](TensorNode& self) {
        for (std::size_t i = 0; i < na->size(); ++i) na->grad[i] += self.grad[0];
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor mean(const Tensor& a) {
    const NodePtr& na = require_node(a);
    if (na->size() == 0) throw std::domain_error("mean: empty tensor");
    double acc = 0.0;
    for (double v : na->values) acc += v;
    const double inv_n = 1.0 / static_cast<double>(na->size());
    auto node = make_result({1}, {acc * inv_n}, {na}, [na, inv_n](TensorNode& self) {
        for (std::size_t i = 0; i < na->size(); ++i) na->grad[i] += self.grad[0] * inv_n;
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor softmax_rows(const Tensor& logits) {
    const NodePtr& nl = require_node(logits);
    if (nl->shape.size() != 2) {
        throw std::invalid_argument("softmax_rows: needs a 2-D tensor, got " +
                                    shape_string(nl->shape));
    }
    const std::size_t rows = nl->shape[0], cols = nl->shape[1];
    std::vector<double> out(nl->size());
    for (std::size_t i = 0; i < rows; ++i) {
        const double* in_row = nl->values.data() + i * cols;
        double* out_row = out.data() + i * cols;
        double row_max = in_row[0];
        for (std::size_t j = 1; j < cols; ++j) row_max = std::max(row_max, in_row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            out_row[j] = std::exp(in_row[j] - row_max);
            denom += out_row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) out_row[j] /= denom;
    }
    auto node = make_result(nl->shape, std::move(out), {nl}, [nl, rows, cols](TensorNode& self) {
        for (std::size_t i = 0; i < rows; ++i) {
            const double* y = self.values.data() + i * cols;
            const double* g = self.grad.data() + i * cols;
            double dot = 0.0;
            for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < cols; ++j) {
                nl->grad[i * cols + j] += y[j] * (g[j] - dot);
            }
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor log_elementwise(const Tensor& a) {
    const NodePtr& na = require_node(a);
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(na->values[i]);
    auto node = make_result(na->shape, std::move(out), {na}, [na](TensorNode& self) {
        for (std::size_t i = 0; i < self.size(); ++i) na->grad[i] += self.grad[i] / na->values[i];
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor pow_elementwise(const Tensor& a, double exponent) {
    const NodePtr& na = require_node(a);
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::pow(na->values[i], exponent);
    auto node = make_result(na->shape, std::move(out), {na}, [na, exponent](TensorNode& self) {
        if (exponent == 0.0) return; // constant 1
        for (std::size_t i = 0; i < self.size(); ++i) {
            na->grad[i] += self.grad[i] * exponent * std::pow(na->values[i], exponent - 1.0);
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor clamp_min(const Tensor& a, double lower) {
    const NodePtr& na = require_node(a);
    std::vector<double> out(na->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(na->values[i], lower);
    auto node = make_result(na->shape, std::move(out), {na}, [na, lower](TensorNode& self) {
        for (std::size_t i = 0; i < self.size(); ++i) {
            if (na->values[i] >= lower) na->grad[i] += self.grad[i];
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor take(const Tensor& a, std::vector<std::size_t> flat_indices) {
    const NodePtr& na = require_node(a);
    if (flat_indices.empty()) throw std::invalid_argument("take: empty index list");
    std::vector<double> out(flat_indices.size());
    for (std::size_t i = 0; i < flat_indices.size(); ++i) {
        if (flat_indices[i] >= na->size()) {
            throw std::invalid_argument("take: index " + std::to_string(flat_indices[i]) +
                                        " out of range for " + shape_string(na->shape));
        }
        out[i] = na->values[flat_indices[i]];
    }
    auto indices = std::make_shared<std::vector<std::size_t>>(std::move(flat_indices));
    auto node = make_result({out.size()}, std::move(out), {na}, [na, indices](TensorNode& self) {
        for (std::size_t i = 0; i < indices->size(); ++i) {
            na->grad[(*indices)[i]] += self.grad[i];
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor stack_scalars(const std::vector<Tensor>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("stack_scalars: empty input");
    std::vector<NodePtr> parents;
    parents.reserve(scalars.size());
    std::vector<double> out(scalars.size());
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        const NodePtr& n = require_node(scalars[i]);
        if (n->size() != 1) {
            throw std::invalid_argument("stack_scalars: element " + std::to_string(i) +
                                        " is not a scalar");
        }
        out[i] = n->values[0];
        parents.push_back(n);
    }
    auto node = make_result({out.size()}, std::move(out), std::move(parents), [](TensorNode& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            TensorNode& parent = *self.parents[i];
            if (parent.requires_grad) parent.grad[0] += self.grad[i];
        }
    });
    return NodeAccess::wrap(std::move(node));
}

Tensor row_distance(const Tensor& points, std::size_t i, std::size_t j) {
    const NodePtr& np = require_node(points);
    if (np->shape.size() != 2) {
        throw std::invalid_argument("row_distance: needs a 2-D tensor, got " +
                                    shape_string(np->shape));
    }
    const std::size_t n = np->shape[0], d = np->shape[1];
    if (i >= n || j >= n) throw std::invalid_argument("row_distance: row index out of range");
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = np->values[i * d + k] - np->values[j * d + k];
        sq += diff * diff;
    }
    const double dist = std::sqrt(sq);
    auto node = make_result({1}, {dist}, {np}, [np, i, j, d, dist](TensorNode& self) {
        if (dist == 0.0) return; // subgradient 0 at coincident rows
        const double coeff = self.grad[0] / dist;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = np->values[i * d + k] - np->values[j * d + k];
            np->grad[i * d + k] += coeff * diff;
            np->grad[j * d + k] -= coeff * diff;
        }
    });
    return NodeAccess::wrap(std::move(node));
}

BatchNormResult batch_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                double eps) {
    const NodePtr& nx = require_node(x);
    const NodePtr& ng = require_node(gamma);
    const NodePtr& nb = require_node(beta);
    if (nx->shape.size() != 2) {
        throw std::invalid_argument("batch_norm_rows: needs a 2-D input, got " +
                                    shape_string(nx->shape));
    }
    const std::size_t batch = nx->shape[0], d = nx->shape[1];
    if (batch < 2) {
        throw std::invalid_argument(
            "batch_norm_rows: training-mode batch normalization needs a batch of at least 2 rows, got " +
            std::to_string(batch));
    }
    if (ng->shape.size() != 1 || ng->shape[0] != d || nb->shape.size() != 1 || nb->shape[0] != d) {
        throw std::invalid_argument("batch_norm_rows: gamma/beta must be length-" +
                                    std::to_string(d) + " vectors");
    }
    std::vector<double> col_mean(d, 0.0), col_var(d, 0.0), inv_std(d, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < d; ++j) col_mean[j] += nx->values[i * d + j];
    }
    for (std::size_t j = 0; j < d; ++j) col_mean[j] /= static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = nx->values[i * d + j] - col_mean[j];
            col_var[j] += diff * diff;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        col_var[j] /= static_cast<double>(batch);
        inv_std[j] = 1.0 / std::sqrt(col_var[j] + eps);
    }
    auto xhat = std::make_shared<std::vector<double>>(batch * d);
    std::vector<double> out(batch * d);
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (nx->values[i * d + j] - col_mean[j]) * inv_std[j];
            (*xhat)[i * d + j] = h;
            out[i * d + j] = ng->values[j] * h + nb->values[j];
        }
    }
    auto inv = std::make_shared<std::vector<double>>(std::move(inv_std));
    auto node = make_result(
        nx->shape, std::move(out), {nx, ng, nb}, [nx, ng, nb, xhat, inv, batch, d](TensorNode& self) {
            const double inv_b = 1.0 / static_cast<double>(batch);
            for (std::size_t j = 0; j < d; ++j) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t i = 0; i < batch; ++i) {
                    const double dy = self.grad[i * d + j];
                    sum_dy += dy;
                    sum_dy_xhat += dy * (*xhat)[i * d + j];
                }
                if (ng->requires_grad) ng->grad[j] += sum_dy_xhat;
                if (nb->requires_grad) nb->grad[j] += sum_dy;
                if (nx->requires_grad) {
                    const double g = ng->values[j];
                    for (std::size_t i = 0; i < batch; ++i) {
                        const double dxhat = self.grad[i * d + j] * g;
                        nx->grad[i * d + j] +=
                            (*inv)[j] * (dxhat - inv_b * (g * sum_dy) -
                                         (*xhat)[i * d + j] * inv_b * (g * sum_dy_xhat));
                    }
                }
            }
        });
    BatchNormResult result;
    result.output = NodeAccess::wrap(std::move(node));
    result.batch_mean = std::move(col_mean);
    result.batch_var = std::move(col_var);
    return result;
}

// --- backward ----------------------------------------------------------------

void backward(const Tensor& loss) {
    const NodePtr& root = require_node(loss);
    if (root->size() != 1) {
        throw std::invalid_argument("backward: loss must be a scalar, got " +
                                    shape_string(root->shape));
    }
    if (!root->requires_grad) {
        // Constant loss: nothing depends on any parameter.
        return;
    }
    // Iterative post-order walk; gives parents before children, so the reverse
    // visits each node exactly once after all of its consumers.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    visited.insert(root.get());
    stack.emplace_back(root.get(), 0);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (TensorNode* node : order) {
        node->grad.assign(node->size(), 0.0);
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
}

// --- finite differences -------------------------------------------------------

double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         double step) {
    if (step <= 0.0) throw std::domain_error("finite_diff_check: step must be positive");
    Tensor loss = f();
    backward(loss);
    std::vector<std::vector<double>> auto_grads;
    auto_grads.reserve(params.size());
    for (const Tensor& p : params) {
        auto g = p.grad();
        auto_grads.emplace_back(g.begin(), g.end());
    }
    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor param = params[pi];
        auto values = param.mutable_data();
        for (std::size_t c = 0; c < values.size(); ++c) {
            const double original = values[c];
            values[c] = original + step;
            const double up = f().value();
            values[c] = original - step;
            const double down = f().value();
            values[c] = original;
            const double fd = (up - down) / (2.0 * step);
            const double g = auto_grads[pi][c];
            const double denom = std::max({std::fabs(fd), std::fabs(g), 1e-8});
            max_rel = std::max(max_rel, std::fabs(fd - g) / denom);
        }
    }
    return max_rel;
}

} // namespace quadml
