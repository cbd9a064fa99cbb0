#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <sralstm/diffcore.hpp>

#include "oracles.hpp"

using namespace sralstm;

namespace {

using OpFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Scalarizes op's output with fixed random weights and compares the gradient
// of every input entry against central differences.
void expect_op_gradients(const std::string& name, std::vector<Tensor> inputs, const OpFn& op, std::uint64_t seed,
                         double rel = 1e-4) {
    std::mt19937_64 rng(seed);
    std::vector<Var> vars;
    for (auto& t : inputs) vars.push_back(Var::variable(t));
    Tape probe(false);
    const Shape out_shape = op(probe, vars).shape();
    const Var weights = Var::constant(oracle::random_tensor(out_shape, rng));

    Tape tape;
    const Var loss = sum(tape, mul(tape, op(tape, vars), weights));
    tape.backward(loss);

    for (std::size_t k = 0; k < vars.size(); ++k) {
        auto f = [&] {
            Tape t(false);
            return sum(t, mul(t, op(t, vars), weights)).item();
        };
        auto bad = oracle::check_gradient(name + " input " + std::to_string(k), vars[k].tensor().values,
                                          vars[k].value().grad, oracle::all_indices(vars[k].numel()), f, rel);
        for (const auto& b : bad)
            ADD_FAILURE() << b.where << "[" << b.index << "] analytic " << b.analytic << " numeric " << b.numeric;
    }
}

}  // namespace

TEST(Elementwise, KnownValues) {
    Tape t(false);
    EXPECT_EQ(sigmoid(t, Var::constant(Tensor::scalar(0.0))).item(), 0.5);
    EXPECT_EQ(tanh(t, Var::constant(Tensor::scalar(0.0))).item(), 0.0);
    EXPECT_EQ(relu(t, Var::constant(Tensor::scalar(-3.0))).item(), 0.0);
    EXPECT_EQ(relu(t, Var::constant(Tensor::scalar(2.5))).item(), 2.5);
}

TEST(Elementwise, SigmoidDerivativeAtOne) {
    Tape tape;
    const Var x = Var::variable(Tensor::scalar(1.0));
    tape.backward(sigmoid(tape, x));
    const double s = oracle::sigmoid(1.0);
    const double h = 1e-5;
    const double fd = (oracle::sigmoid(1.0 + h) - oracle::sigmoid(1.0 - h)) / (2 * h);
    EXPECT_NEAR(x.value().grad[0], fd, 1e-6 * std::abs(fd));
    EXPECT_NEAR(x.value().grad[0], s * (1 - s), 1e-15);
}

TEST(Elementwise, ShapeMismatchThrows) {
    Tape t;
    const Var a = Var::variable(Tensor({2, 3}));
    const Var b = Var::variable(Tensor({3, 2}));
    EXPECT_THROW(add(t, a, b), ShapeError);
    EXPECT_THROW(mul(t, a, Var::constant(Tensor({1, 3}))), ShapeError);
}

TEST(Elementwise, OverflowRaisesNumericError) {
    Tape t;
    EXPECT_THROW(exp(t, Var::constant(Tensor::scalar(1000.0))), NumericError);
}

TEST(Primitives, FiniteDifferenceGradients) {
    std::mt19937_64 rng(11);
    auto r = [&](Shape s) { return oracle::random_tensor(std::move(s), rng, -1.5, 1.5); };
    expect_op_gradients("matmul", {r({3, 4}), r({4, 2})}, [](Tape& t, auto& v) { return matmul(t, v[0], v[1]); }, 1);
    expect_op_gradients("sigmoid", {r({2, 5})}, [](Tape& t, auto& v) { return sigmoid(t, v[0]); }, 2);
    expect_op_gradients("tanh", {r({2, 5})}, [](Tape& t, auto& v) { return tanh(t, v[0]); }, 3);
    expect_op_gradients("exp", {r({2, 5})}, [](Tape& t, auto& v) { return exp(t, v[0]); }, 4);
    // Keep relu inputs away from the kink.
    Tensor away = r({3, 3});
    for (double& x : away.values) x += x > 0 ? 0.1 : -0.1;
    expect_op_gradients("relu", {away}, [](Tape& t, auto& v) { return relu(t, v[0]); }, 5);
    expect_op_gradients("add", {r({2, 3}), r({2, 3})}, [](Tape& t, auto& v) { return add(t, v[0], v[1]); }, 6);
    expect_op_gradients("sub", {r({2, 3}), r({2, 3})}, [](Tape& t, auto& v) { return sub(t, v[0], v[1]); }, 7);
    expect_op_gradients("mul", {r({2, 3}), r({2, 3})}, [](Tape& t, auto& v) { return mul(t, v[0], v[1]); }, 8);
    expect_op_gradients("add_bias", {r({4, 3}), r({1, 3})},
                        [](Tape& t, auto& v) { return add_bias(t, v[0], v[1]); }, 9);
    expect_op_gradients("scale", {r({2, 2})}, [](Tape& t, auto& v) { return scale(t, v[0], -2.5); }, 10);
    expect_op_gradients("sum", {r({3, 2})}, [](Tape& t, auto& v) { return sum(t, v[0]); }, 11);
    expect_op_gradients("concat0", {r({1, 3}), r({2, 3})},
                        [](Tape& t, auto& v) { return concat(t, {v[0], v[1]}, 0); }, 12);
    expect_op_gradients("concat1", {r({2, 1}), r({2, 3}), r({2, 2})},
                        [](Tape& t, auto& v) { return concat(t, {v[0], v[1], v[2]}, 1); }, 13);
    expect_op_gradients("slice", {r({4, 5})}, [](Tape& t, auto& v) { return slice(t, v[0], 1, 1, 4); }, 14);
    expect_op_gradients("gather_rows", {r({3, 2})},
                        [](Tape& t, auto& v) {
                            const std::vector<std::size_t> idx{2, 0, 2, 1};
                            return gather_rows(t, v[0], idx);
                        },
                        15);
    expect_op_gradients("masked_softmax", {r({4, 1})},
                        [](Tape& t, auto& v) { return masked_softmax(t, v[0], {true, false, true, true}); }, 16);
    expect_op_gradients("weighted_sum", {r({3, 1}), r({3, 4})},
                        [](Tape& t, auto& v) { return weighted_sum(t, v[0], v[1]); }, 17);
}

TEST(Concat, Values) {
    Tape t(false);
    const Var a = Var::constant(Tensor::matrix({{1, 2}}));
    const Var b = Var::constant(Tensor::matrix({{3, 4}}));
    EXPECT_EQ(concat(t, {a, b}, 1).value().values, (std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(concat(t, {a, b}, 0).value().shape, (Shape{2, 2}));
    const Var single = concat(t, {a}, 1);
    EXPECT_EQ(single.value().values, a.value().values);
    EXPECT_THROW(concat(t, {a, Var::constant(Tensor({2, 2}))}, 1), ShapeError);
}

TEST(Concat, GradientRoutesOnes) {
    Tape tape;
    const Var a = Var::variable(Tensor({2, 3}, 0.7));
    const Var b = Var::variable(Tensor({2, 1}, -0.2));
    tape.backward(sum(tape, concat(tape, {a, b}, 1)));
    for (double g : a.value().grad) EXPECT_EQ(g, 1.0);
    for (double g : b.value().grad) EXPECT_EQ(g, 1.0);
}

TEST(MaskedSoftmax, Examples) {
    Tape t(false);
    auto run = [&](std::vector<double> l, std::vector<bool> m) {
        const std::size_t n = l.size();
        return masked_softmax(t, Var::constant(Tensor({n, 1}, std::move(l))), m).value().values;
    };
    EXPECT_EQ(run({0, 0}, {true, true}), (std::vector<double>{0.5, 0.5}));
    for (double c : {-40.0, 0.0, 3.0, 500.0}) {
        const auto y = run({c, c + std::numbers::ln2}, {true, true});
        EXPECT_NEAR(y[0], 1.0 / 3.0, 1e-15);
        EXPECT_NEAR(y[1], 2.0 / 3.0, 1e-15);
    }
    EXPECT_EQ(run({5, 99}, {true, false}), (std::vector<double>{1.0, 0.0}));
    EXPECT_THROW(run({1, 2}, {false, false}), EmptyNeighborSetError);
}

TEST(MaskedSoftmax, RandomizedProperties) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> len(1, 9);
    std::uniform_real_distribution<double> logit(-30.0, 30.0), shift(-100.0, 100.0);
    std::bernoulli_distribution keep(0.7);
    Tape t(false);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = len(rng);
        std::vector<double> l(n);
        std::vector<bool> m(n);
        for (std::size_t i = 0; i < n; ++i) {
            l[i] = logit(rng);
            m[i] = keep(rng);
        }
        m[rng() % n] = true;
        const auto y = masked_softmax(t, Var::constant(Tensor({n, 1}, l)), m).value().values;
        const double c = shift(rng);
        for (auto& v : l) v += c;
        const auto y2 = masked_softmax(t, Var::constant(Tensor({n, 1}, l)), m).value().values;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            EXPECT_GE(y[i], 0.0);
            if (!m[i]) {
                EXPECT_EQ(y[i], 0.0);
            }
            EXPECT_NEAR(y[i], y2[i], 1e-12);
            s += y[i];
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(Backward, Examples) {
    {
        Tape tape;
        const Var x = Var::variable(Tensor({2, 3}, 4.0));
        tape.backward(sum(tape, x));
        for (double g : x.value().grad) EXPECT_EQ(g, 1.0);
    }
    {
        Tape tape;
        const Var x = Var::variable(Tensor::row({1, 2, 3}));
        tape.backward(sum(tape, mul(tape, x, x)));
        EXPECT_EQ(x.value().grad, (std::vector<double>{2, 4, 6}));
    }
}

TEST(Backward, NonScalarRootThrows) {
    Tape tape;
    const Var x = Var::variable(Tensor::row({1, 2}));
    EXPECT_THROW(tape.backward(scale(tape, x, 2.0)), ShapeError);
}

TEST(Backward, SecondReplayDoublesLeafGradients) {
    std::mt19937_64 rng(3);
    Tensor w = oracle::random_tensor({3, 3}, rng);
    Tensor b = oracle::random_tensor({1, 3}, rng);
    Tape tape;
    const Var x = Var::constant(oracle::random_tensor({2, 3}, rng));
    const Var loss = sum(tape, tanh(tape, add_bias(tape, matmul(tape, x, Var::leaf(w)), Var::leaf(b))));
    tape.backward(loss);
    const auto gw = w.grad, gb = b.grad;
    tape.backward(loss);
    for (std::size_t i = 0; i < gw.size(); ++i) EXPECT_EQ(w.grad[i], 2.0 * gw[i]);
    for (std::size_t i = 0; i < gb.size(); ++i) EXPECT_EQ(b.grad[i], 2.0 * gb[i]);
}

TEST(Backward, NonRecordingTapeRecordsNothing) {
    Tensor w({2, 2}, 1.0);
    Tape tape(false);
    matmul(tape, Var::constant(Tensor({1, 2}, 1.0)), Var::leaf(w));
    EXPECT_EQ(tape.size(), 0u);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    NamedTensors p;
    p.emplace("w", Tensor::row({1.0, -2.0, 3.5}));
    p["w"].ensure_grad();
    AdamState s;
    const auto before = p["w"].values;
    for (int i = 0; i < 5; ++i) adam_step(p, s);
    EXPECT_EQ(p["w"].values, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    NamedTensors p;
    p.emplace("w", Tensor::scalar(1.0));
    p["w"].grad = {1.0};
    AdamState s;
    adam_step(p, s);
    // m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps).
    EXPECT_NEAR(p["w"].values[0], 1.0 - 1e-3 / (1.0 + 1e-8), 1e-15);
    EXPECT_EQ(p["w"].grad[0], 1.0);
}

TEST(Adam, MinimizesQuadratic) {
    NamedTensors p;
    p.emplace("w", Tensor::scalar(5.0));
    AdamState s(AdamConfig{0.1});
    std::vector<double> losses;
    for (int i = 0; i < 100; ++i) {
        Tape tape;
        const Var w = Var::leaf(p["w"]);
        p["w"].zero_grad();
        const Var loss = sum(tape, mul(tape, w, w));
        tape.backward(loss);
        losses.push_back(loss.item());
        adam_step(p, s);
    }
    EXPECT_LT(std::abs(p["w"].values[0]), 5.0);
    for (std::size_t w = 0; w + 1 < 5; ++w) {
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < 20; ++i) {
            a += losses[w * 20 + i];
            b += losses[(w + 1) * 20 + i];
        }
        EXPECT_LT(b, a) << "window " << w;
    }
}

TEST(Adam, MissingGradientThrows) {
    NamedTensors p;
    p.emplace("w", Tensor::scalar(1.0));
    AdamState s;
    EXPECT_THROW(adam_step(p, s), std::invalid_argument);
    EXPECT_THROW(AdamState(AdamConfig{1e-3, 1.0}), std::invalid_argument);
}

TEST(ClipGradNorm, RescalesToMaximum) {
    NamedTensors p;
    p.emplace("a", Tensor::row({0, 0}));
    p.emplace("b", Tensor::scalar(0));
    p["a"].grad = {30.0, 0.0};
    p["b"].grad = {40.0};
    EXPECT_EQ(clip_grad_norm(p, 10.0), 50.0);
    EXPECT_NEAR(grad_norm(p), 10.0, 1e-12);
    EXPECT_NEAR(p["a"].grad[0], 6.0, 1e-12);
    EXPECT_EQ(clip_grad_norm(p, 100.0), grad_norm(p));
}

TEST(CanonicalSum, OrderIndependent) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-1e3, 1e3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(7);
        for (double& x : v) x = d(rng) * std::pow(10.0, static_cast<double>(trial % 9) - 4);
        const double s = canonical_sum(v);
        std::shuffle(v.begin(), v.end(), rng);
        EXPECT_EQ(canonical_sum(v), s);
    }
}
