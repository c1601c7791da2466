#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "ivhedge/autodiff.hpp"
#include "ivhedge/errors.hpp"
#include "ivhedge/rng.hpp"

namespace ivhedge {
namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

Array random_array(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double lo = -1.5, double hi = 1.5) {
    RngStream g(seed, 0);
    Array a(r, c);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = lo + (hi - lo) * g.uniform();
    }
    return a;
}

/// Scalar objective sum(w .* f(inputs)) with fixed random weights w.
double objective(const Builder& f, const std::vector<Array>& inputs, Array* weights) {
    Tape t;
    std::vector<Var> leaves;
    for (const auto& a : inputs) {
        leaves.push_back(t.leaf(a, false));
    }
    const Var out = f(t, leaves);
    if (weights->size() == 0) {
        *weights = random_array(out.rows(), out.cols(), 1234);
    }
    return (out.value() * *weights).sum();
}

/// Compares reverse-mode gradients with central differences at every input coordinate.
void expect_gradients_match(const Builder& f, std::vector<Array> inputs, double tol = 1e-7) {
    Array w;
    objective(f, inputs, &w);
    Tape t;
    std::vector<Var> leaves;
    for (const auto& a : inputs) {
        leaves.push_back(t.leaf(a, true));
    }
    t.backward(dot(f(t, leaves), w));
    const double h = 1e-6;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Array g = t.grad(leaves[k]);
        ASSERT_EQ(g.rows(), inputs[k].rows());
        ASSERT_EQ(g.cols(), inputs[k].cols());
        for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
            const double x0 = inputs[k].data()[i];
            inputs[k].data()[i] = x0 + h;
            const double up = objective(f, inputs, &w);
            inputs[k].data()[i] = x0 - h;
            const double dn = objective(f, inputs, &w);
            inputs[k].data()[i] = x0;
            const double fd = (up - dn) / (2 * h);
            EXPECT_NEAR(g.data()[i], fd, tol * std::max(1.0, std::abs(fd))) << "input " << k << " entry " << i;
        }
    }
}

TEST(Autodiff, ScalarChainMatchesClosedForm) {
    for (const double x : {-1.0, 0.0, 2.0}) {
        Tape t;
        const Var v = t.leaf(Array::Constant(1, 1, x), true);
        const Var y = tanh(sigmoid(v));
        t.backward(y);
        const double s = 1.0 / (1.0 + std::exp(-x));
        const double expected = (1.0 - std::tanh(s) * std::tanh(s)) * s * (1.0 - s);
        EXPECT_NEAR(t.grad(v)(0, 0), expected, 1e-12);
    }
}

TEST(Autodiff, ElementwiseOps) {
    const Array a = random_array(3, 4, 1);
    const Array b = random_array(3, 4, 2);
    const Array c = random_array(3, 4, 3);
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return v[0] + v[1]; }, {a, b});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return v[0] - v[1]; }, {a, b});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return v[0] * v[1]; }, {a, b});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return -v[0]; }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return 2.5 * v[0] + 1.0; }, {a});
    expect_gradients_match([&](Tape&, const std::vector<Var>& v) { return add(v[0], c); }, {a});
    expect_gradients_match([&](Tape&, const std::vector<Var>& v) { return mul(v[0], c); }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return square(v[0]); }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return sigmoid(v[0]); }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return tanh(v[0]); }, {a});
}

TEST(Autodiff, PiecewiseOpsAwayFromKinks) {
    // Random draws are at least 1e-3 away from zero and from each other with overwhelming probability.
    const Array a = random_array(3, 5, 4);
    const Array b = random_array(3, 5, 5);
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return relu(v[0]); }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return abs(v[0]); }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return min(v[0], v[1]); }, {a, b});
    const Mask m = a > b;
    expect_gradients_match([&](Tape&, const std::vector<Var>& v) { return select(m, v[0], v[1]); }, {a, b});
}

TEST(Autodiff, Reductions) {
    const Array a = random_array(3, 4, 6);
    const Array b = random_array(2, 4, 7);
    const Array w = random_array(3, 4, 8);
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return sum(square(v[0])); }, {a});
    expect_gradients_match([&](Tape&, const std::vector<Var>& v) { return dot(tanh(v[0]), w); }, {a});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return vstack(v[0], v[1]); }, {a, b});
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return row(v[0], 1); }, {a});
}

TEST(Autodiff, DenseAndGatedCell) {
    const Array W = random_array(4, 3, 9);
    const Array b = random_array(4, 1, 10);
    const Array x = random_array(3, 6, 11);
    expect_gradients_match(
        [](Tape&, const std::vector<Var>& v) { return dense(v[0], v[1], v[2], Activation::Identity); }, {W, b, x});
    // Keep the ReLU pre-activations away from zero by shifting the bias.
    expect_gradients_match(
        [](Tape&, const std::vector<Var>& v) { return dense(v[0], v[1], v[2], Activation::Relu); },
        {W, Array(b + 0.013), x});
    const Array Wc = random_array(6, 3, 12);
    const Array bc = random_array(6, 1, 13);
    expect_gradients_match([](Tape&, const std::vector<Var>& v) { return lstm_cell(v[0], v[1], v[2]); },
                           {Wc, bc, x});
}

TEST(Autodiff, GatedCellForwardValues) {
    Tape t;
    Array W(3, 1);
    W << 0.5, -1.0, 2.0;
    Array b(3, 1);
    b << 0.1, 0.2, -0.3;
    const Var out = lstm_cell(t.constant(W), t.constant(b), t.constant(Array::Constant(1, 1, 0.7)));
    auto sg = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
    const double i = sg(0.5 * 0.7 + 0.1);
    const double o = sg(-1.0 * 0.7 + 0.2);
    const double c = i * std::tanh(2.0 * 0.7 - 0.3);
    EXPECT_NEAR(out.value()(0, 0), o * std::tanh(c), 1e-15);
}

TEST(Autodiff, SubgradientConventions) {
    Tape t;
    const Var a = t.leaf(Array::Constant(1, 3, 0.0), true);
    const Var b = t.leaf(Array::Constant(1, 3, 0.0), true);
    t.backward(sum(min(a, b) + abs(a) + relu(b)));
    EXPECT_TRUE((t.grad(a) == 1.0).all());
    EXPECT_TRUE((t.grad(b) == 0.0).all());
}

TEST(Autodiff, DeadReluHasZeroGradient) {
    Tape t;
    Array Wv = Array::Constant(2, 2, 0.3);
    Array bv(2, 1);
    bv << -10.0, 0.5;
    const Var W = t.leaf(Wv, true);
    const Var b = t.leaf(bv, true);
    const Var x = t.constant(random_array(2, 5, 14, 0.0, 1.0));
    t.backward(sum(dense(W, b, x, Activation::Relu)));
    const Array gW = t.grad(W);
    EXPECT_EQ(gW(0, 0), 0.0);
    EXPECT_EQ(gW(0, 1), 0.0);
    EXPECT_EQ(t.grad(b)(0, 0), 0.0);
    EXPECT_NE(gW(1, 0), 0.0);
}

TEST(Autodiff, UnreachedLeafHasZeroGradient) {
    Tape t;
    const Var a = t.leaf(Array::Constant(2, 2, 1.0), true);
    const Var b = t.leaf(Array::Constant(2, 2, 1.0), true);
    t.backward(sum(square(a)));
    EXPECT_TRUE((t.grad(b) == 0.0).all());
    EXPECT_EQ(t.grad(b).rows(), 2);
}

TEST(Autodiff, BackwardMisuse) {
    Tape empty;
    Var none{&empty, 0};
    EXPECT_THROW(empty.backward(none), UsageError);
    Tape t;
    const Var a = t.leaf(Array::Constant(1, 1, 1.0), true);
    const Var y = square(a);
    t.backward(y);
    EXPECT_THROW(t.backward(y), UsageError);
}

TEST(Autodiff, KinkTrackingRecordsBranchesAndMargins) {
    auto run = [](double x) {
        Tape t;
        t.set_track_kinks(true);
        relu(t.constant(Array::Constant(1, 1, x)));
        return std::make_pair(t.signature(), t.min_kink_margin());
    };
    const auto [s1, m1] = run(0.25);
    const auto [s2, m2] = run(0.5);
    const auto [s3, m3] = run(-0.25);
    EXPECT_EQ(s1, s2);
    EXPECT_NE(s1, s3);
    EXPECT_DOUBLE_EQ(m1, 0.25);
    EXPECT_DOUBLE_EQ(m3, 0.25);
    Tape off;
    const auto before = off.signature();
    relu(off.constant(Array::Constant(1, 1, 1.0)));
    EXPECT_EQ(off.signature(), before);
}

}  // namespace
}  // namespace ivhedge
