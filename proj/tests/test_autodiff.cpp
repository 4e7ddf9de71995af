#include <doctest.h>

#include <cmath>

#include "dopplerkit/adam.hpp"
#include "dopplerkit/errors.hpp"
#include "dopplerkit/ops.hpp"
#include "dopplerkit/rng.hpp"
#include "oracles.hpp"

using namespace dopplerkit;

namespace {

/// Fixed random projection weights turning an op output into a scalar, so
/// every output element contributes to the checked gradient. Built once per
/// check: the loss closure must be a pure function of the checked inputs.
TensorRef projection_for(const std::function<TensorRef(Tape*)>& op_fn, Rng& rng) {
    auto w = make_tensor(op_fn(nullptr)->shape);
    for (double& v : w->data) v = rng.uniform(-1.0, 1.0);
    return w;
}

double projected_gradcheck(const std::function<TensorRef(Tape*)>& op_fn,
                           const std::vector<TensorRef>& inputs, Rng& rng) {
    const TensorRef w = projection_for(op_fn, rng);
    return oracles::gradcheck([&](Tape* t) { return sum(t, mul(t, op_fn(t), w)); }, inputs);
}

}  // namespace

TEST_CASE("backward: loss = sum(x) gives all-ones gradient") {
    auto x = make_tensor({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    Tape tape;
    auto loss = sum(&tape, x);
    tape.backward(loss);
    for (double g : x->grad) CHECK(g == 1.0);
}

TEST_CASE("backward: loss = sum(x^2) at x=3 gives gradient 6") {
    auto x = make_scalar(3.0, true);
    Tape tape;
    auto loss = sum(&tape, mul(&tape, x, x));
    tape.backward(loss);
    CHECK(x->grad[0] == 6.0);
}

TEST_CASE("backward: repeated calls accumulate, non-scalar loss rejected") {
    auto x = make_tensor({2}, {1.0, 2.0}, true);
    Tape tape;
    auto loss = sum(&tape, x);
    tape.backward(loss);
    tape.backward(loss);
    CHECK(x->grad[0] == 2.0);

    Tape tape2;
    auto y = relu(&tape2, x);
    CHECK_THROWS_AS(tape2.backward(y), ContractError);
}

TEST_CASE("gradcheck: every op passes central finite differences, 10 trials") {
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(1000 + static_cast<std::uint64_t>(trial));
        Rng prng(2000 + static_cast<std::uint64_t>(trial));

        {
            auto x = oracles::lattice_tensor({1, 2, 6, 7}, rng, true);
            auto w = oracles::lattice_tensor({3, 2, 3, 3}, rng, true);
            auto b = oracles::lattice_tensor({3}, rng, true);
            const double err = projected_gradcheck(
                [&](Tape* t) { return conv2d(t, x, w, b, 2, 1); }, {x, w, b}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto x = oracles::lattice_tensor({1, 2, 7, 6}, rng, true);
            const double err =
                projected_gradcheck([&](Tape* t) { return blur_pool(t, x, 3, 2); }, {x}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto x = oracles::lattice_tensor({1, 2, 6, 6}, rng, true);
            const double err =
                projected_gradcheck([&](Tape* t) { return max_pool(t, x, 2, 2); }, {x}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto x = oracles::lattice_tensor({1, 2, 3, 4}, rng, true);
            const double err =
                projected_gradcheck([&](Tape* t) { return upsample_nearest2x(t, x); }, {x}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto x = oracles::lattice_tensor({2, 3, 4, 5}, rng, true);
            const double err =
                projected_gradcheck([&](Tape* t) { return global_avg_pool(t, x); }, {x}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto x = oracles::lattice_tensor({2, 3, 4, 4}, rng, true);
            const double err = projected_gradcheck([&](Tape* t) { return relu(t, x); }, {x}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto x = oracles::lattice_tensor({2, 3, 4, 4}, rng, true);
            const double err = projected_gradcheck([&](Tape* t) { return sigmoid(t, x); }, {x}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto a = oracles::lattice_tensor({1, 3, 4, 5}, rng, true);
            auto ctx = oracles::lattice_tensor({1, 3, 1, 1}, rng, true);
            const double err =
                projected_gradcheck([&](Tape* t) { return add(t, a, ctx); }, {a, ctx}, prng);
            CHECK(err < 1e-6);
            const double err2 =
                projected_gradcheck([&](Tape* t) { return mul(t, a, ctx); }, {a, ctx}, prng);
            CHECK(err2 < 1e-6);
        }
        {
            auto a = oracles::lattice_tensor({1, 2, 3, 4}, rng, true);
            auto b = oracles::lattice_tensor({1, 3, 3, 4}, rng, true);
            const double err = projected_gradcheck(
                [&](Tape* t) { return concat_channels(t, a, b); }, {a, b}, prng);
            CHECK(err < 1e-6);
        }
        {
            auto logits = oracles::lattice_tensor({2, 4, 3, 3}, rng, true);
            std::vector<int> targets(2 * 3 * 3);
            for (std::size_t i = 0; i < targets.size(); ++i)
                targets[i] = static_cast<int>(rng.uniform_int(0, 3));
            targets[3] = -1;  // one ignored position
            const double err = oracles::gradcheck(
                [&](Tape* t) { return cross_entropy(t, logits, targets, -1); }, {logits});
            CHECK(err < 1e-6);
        }
    }
}

TEST_CASE("adam: first step moves by about -lr * sign(grad)") {
    std::vector<double> param = {1.0, -2.0, 0.5};
    std::vector<double> grad = {0.3, -1.7, 4.0};
    AdamState st = make_adam_state(3, 1e-3);
    adam_step(param, grad, st);
    CHECK(param[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
    CHECK(param[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
    CHECK(param[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
    CHECK(st.t == 1);
}

TEST_CASE("adam: zero grad with zero state leaves the parameter unchanged") {
    std::vector<double> param = {2.0};
    std::vector<double> grad = {0.0};
    AdamState st = make_adam_state(1);
    adam_step(param, grad, st);
    CHECK(param[0] == 2.0);
}

TEST_CASE("adam: three steps match the hand-stepped recurrence to 1e-12") {
    // spreadsheet-style oracle: explicit recurrence on a scalar parameter
    const double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double grads[3] = {0.5, -0.25, 0.125};
    double p_ref = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
        const double g = grads[t - 1];
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mhat = m / (1 - std::pow(b1, t));
        const double vhat = v / (1 - std::pow(b2, t));
        p_ref -= lr * mhat / (std::sqrt(vhat) + eps);
    }

    std::vector<double> param = {1.0};
    AdamState st = make_adam_state(1, lr, b1, b2, eps);
    for (double g : grads) {
        std::vector<double> grad = {g};
        adam_step(param, grad, st);
    }
    CHECK(param[0] == doctest::Approx(p_ref).epsilon(1e-12));
    CHECK(st.t == 3);
}
