#include <doctest.h>

#include <cmath>
#include <vector>

#include "quadml/rng.hpp"
#include "quadml/tensor.hpp"

using namespace quadml;

namespace {

Tensor random_leaf(std::vector<std::size_t> shape, Rng& rng, double lo = -2.0, double hi = 2.0,
                   bool requires_grad = true) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    std::vector<double> values(n);
    for (double& v : values) v = rng.uniform(lo, hi);
    return Tensor::from_values(std::move(shape), std::move(values), requires_grad);
}

} // namespace

TEST_CASE("matmul identity returns the operand exactly") {
    Rng rng(11);
    Tensor a = random_leaf({3, 3}, rng);
    Tensor out = matmul(a, Tensor::identity(3));
    for (std::size_t i = 0; i < 9; ++i) {
        CHECK(out.data()[i] == a.data()[i]);
    }
}

TEST_CASE("matmul hand case") {
    Tensor a = Tensor::matrix(2, 2, {1, 2, 3, 4});
    Tensor b = Tensor::matrix(2, 1, {1, 1});
    Tensor out = matmul(a, b);
    CHECK(out.at(0, 0) == doctest::Approx(3.0));
    CHECK(out.at(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("matmul shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("elementwise basics") {
    Tensor x = Tensor::from_values({2}, {-1.0, 2.0});
    Tensor y = leaky_relu(x, 0.01);
    CHECK(y.data()[0] == doctest::Approx(-0.01));
    CHECK(y.data()[1] == doctest::Approx(2.0));

    Tensor a = Tensor::from_values({2}, {1.0, 2.0});
    Tensor b = Tensor::from_values({2}, {3.0, 4.0});
    Tensor s = add(a, b);
    CHECK(s.data()[0] == doctest::Approx(4.0));
    CHECK(s.data()[1] == doctest::Approx(6.0));

    CHECK_THROWS_AS(add(a, Tensor::zeros({3})), std::invalid_argument);
}

TEST_CASE("reductions") {
    Tensor t = Tensor::from_values({3}, {1.0, 2.0, 3.0});
    CHECK(mean(t).value() == doctest::Approx(2.0));
    Tensor two = Tensor::from_values({2}, {0.5, 0.25});
    CHECK(sum(two).value() == doctest::Approx(0.75));
}

TEST_CASE("backward of sum gives all-ones") {
    Tensor x = Tensor::zeros({2, 3}, true);
    Tensor loss = sum(x);
    backward(loss);
    for (double g : x.grad()) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward of mean of squares") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor loss = mean(mul(x, x));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(2.0));
}

TEST_CASE("detached leaf keeps zero gradient") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor y = Tensor::from_values({2}, {3.0, 4.0}, true);
    Tensor loss = sum(y);
    backward(loss);
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 0.0);
}

TEST_CASE("backward requires a scalar loss") {
    Tensor x = Tensor::zeros({2}, true);
    Tensor y = add(x, x);
    CHECK_THROWS_AS(backward(y), std::invalid_argument);
}

TEST_CASE("repeated backward overwrites gradients") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor loss = sum(x);
    backward(loss);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(1.0));
    CHECK(x.grad()[1] == doctest::Approx(1.0));
}

TEST_CASE("sum of independent subgraphs matches separate gradients") {
    Rng rng(5);
    Tensor x = random_leaf({4}, rng);
    Tensor y = random_leaf({3}, rng);

    Tensor joint = add(sum(mul(x, x)), mean(y));
    backward(joint);
    std::vector<double> gx(x.grad().begin(), x.grad().end());
    std::vector<double> gy(y.grad().begin(), y.grad().end());

    backward(sum(mul(x, x)));
    for (std::size_t i = 0; i < gx.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(gx[i]));
    backward(mean(y));
    for (std::size_t i = 0; i < gy.size(); ++i) CHECK(y.grad()[i] == doctest::Approx(gy[i]));
}

TEST_CASE("finite differences: quadratic") {
    Tensor theta = Tensor::scalar_value(3.0, true);
    auto f = [&] { return mul(theta, theta); };
    double err = finite_diff_check(f, {theta}, 1e-5);
    CHECK(err <= 1e-8);
}

TEST_CASE("finite differences: constant function has zero error") {
    Tensor theta = Tensor::scalar_value(1.5, true);
    auto f = [] { return Tensor::scalar_value(7.0); };
    CHECK(finite_diff_check(f, {theta}, 1e-5) == 0.0);
}

TEST_CASE("every primitive matches central differences") {
    Rng rng(99);
    const double tol = 1e-6;
    const double h = 1e-5;

    SUBCASE("matmul") {
        Tensor a = random_leaf({3, 4}, rng);
        Tensor b = random_leaf({4, 2}, rng);
        auto f = [&] { return sum(mul(matmul(a, b), matmul(a, b))); };
        CHECK(finite_diff_check(f, {a, b}, h) <= tol);
    }
    SUBCASE("add sub mul scale add_scalar") {
        Tensor a = random_leaf({5}, rng);
        Tensor b = random_leaf({5}, rng);
        auto f = [&] {
            Tensor t = add(mul(a, b), scale(sub(a, b), 0.7));
            return mean(mul(t, add_scalar(t, 0.3)));
        };
        CHECK(finite_diff_check(f, {a, b}, h) <= tol);
    }
    SUBCASE("leaky_relu away from the kink") {
        std::vector<double> vals = {-1.8, -0.5, 0.4, 1.2, 1.9, -1.1};
        Tensor a = Tensor::from_values({6}, vals, true);
        auto f = [&] { return sum(leaky_relu(a, 0.01)); };
        CHECK(finite_diff_check(f, {a}, h) <= tol);
    }
    SUBCASE("add_rowvec") {
        Tensor m = random_leaf({3, 4}, rng);
        Tensor r = random_leaf({4}, rng);
        auto f = [&] { return mean(mul(add_rowvec(m, r), add_rowvec(m, r))); };
        CHECK(finite_diff_check(f, {m, r}, h) <= tol);
    }
    SUBCASE("softmax_rows") {
        Tensor logits = random_leaf({3, 5}, rng);
        Tensor weights = random_leaf({3, 5}, rng, 0.1, 1.0, false);
        auto f = [&] { return sum(mul(softmax_rows(logits), weights)); };
        CHECK(finite_diff_check(f, {logits}, h) <= tol);
    }
    SUBCASE("log pow clamp") {
        Tensor a = random_leaf({4}, rng, 0.2, 1.8);
        auto f = [&] {
            Tensor t = log_elementwise(clamp_min(a, 1e-12));
            return sum(mul(t, pow_elementwise(a, 1.7)));
        };
        CHECK(finite_diff_check(f, {a}, h) <= tol);
    }
    SUBCASE("take and stack_scalars") {
        Tensor a = random_leaf({6}, rng);
        auto f = [&] {
            Tensor picked = take(a, {5, 0, 0, 3});
            std::vector<Tensor> parts = {sum(picked), mean(a)};
            return sum(mul(stack_scalars(parts), stack_scalars(parts)));
        };
        CHECK(finite_diff_check(f, {a}, h) <= tol);
    }
    SUBCASE("row_distance") {
        Tensor pts = random_leaf({4, 3}, rng);
        auto f = [&] {
            std::vector<Tensor> dists = {row_distance(pts, 0, 1), row_distance(pts, 2, 3),
                                         row_distance(pts, 0, 3)};
            return sum(stack_scalars(dists));
        };
        CHECK(finite_diff_check(f, {pts}, h) <= tol);
    }
    SUBCASE("batch_norm_rows") {
        Tensor x = random_leaf({6, 3}, rng);
        Tensor gamma = random_leaf({3}, rng, 0.5, 1.5);
        Tensor beta = random_leaf({3}, rng, -0.5, 0.5);
        // Per-row weights keep the loss sensitive to x; a symmetric reduction
        // of normalized outputs would depend on x only through eps.
        Tensor w = random_leaf({6, 3}, rng, 0.2, 1.0, false);
        auto f = [&] {
            auto bn = batch_norm_rows(x, gamma, beta, 1e-5);
            return sum(mul(bn.output, w));
        };
        CHECK(finite_diff_check(f, {x, gamma, beta}, h) <= tol);
    }
}

TEST_CASE("softmax rows sum to one for wild logits") {
    Rng rng(7);
    Tensor logits = random_leaf({8, 7}, rng, -50.0, 50.0, false);
    Tensor probs = softmax_rows(logits);
    for (std::size_t i = 0; i < 8; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 7; ++j) s += probs.at(i, j);
        CHECK(std::fabs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax is stable at extreme logits") {
    Tensor logits = Tensor::matrix(1, 2, {1000.0, 0.0});
    Tensor probs = softmax_rows(logits);
    CHECK(probs.at(0, 0) == doctest::Approx(1.0));
    CHECK(probs.at(0, 1) == doctest::Approx(0.0));
    CHECK(std::isfinite(probs.at(0, 0)));
}

TEST_CASE("row_distance is a plain Euclidean distance") {
    Tensor pts = Tensor::matrix(2, 2, {0.0, 0.0, 3.0, 4.0});
    CHECK(row_distance(pts, 0, 1).value() == doctest::Approx(5.0));
    CHECK(row_distance(pts, 0, 0).value() == 0.0);
}

TEST_CASE("batch_norm_rows rejects single-row batches") {
    Tensor x = Tensor::zeros({1, 3}, true);
    Tensor gamma = Tensor::full({3}, 1.0, true);
    Tensor beta = Tensor::zeros({3}, true);
    CHECK_THROWS_AS(batch_norm_rows(x, gamma, beta, 1e-5), std::invalid_argument);
}

TEST_CASE("batch_norm_rows survives a constant batch") {
    Tensor x = Tensor::full({4, 2}, 3.0, true);
    Tensor gamma = Tensor::full({2}, 1.0, true);
    Tensor beta = Tensor::zeros({2}, true);
    auto bn = batch_norm_rows(x, gamma, beta, 1e-5);
    for (double v : bn.output.data()) CHECK(std::isfinite(v));
    CHECK(bn.batch_var[0] == doctest::Approx(0.0));
}

TEST_CASE("empty reductions are rejected") {
    CHECK_THROWS_AS(Tensor::zeros({0}), std::invalid_argument);
}
