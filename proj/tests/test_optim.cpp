#include "doctest.h"

#include <cmath>

#include "qdgen/optim.hpp"
#include "qdgen/rng.hpp"

using namespace qdgen;
using namespace qdgen::optim;

TEST_CASE("cobyla: shifted quadratic reaches the analytic optimum") {
    auto f = [](std::span<const double> x) {
        return (x[0] - 1.0) * (x[0] - 1.0) + (x[1] + 2.0) * (x[1] + 2.0);
    };
    const std::vector<double> x0 = {0.0, 0.0};
    CobylaResult r = cobyla_minimize(f, x0);
    CHECK(r.status == CobylaStatus::Converged);
    CHECK(std::abs(r.x_best[0] - 1.0) < 1e-3);
    CHECK(std::abs(r.x_best[1] + 2.0) < 1e-3);
}

TEST_CASE("cobyla: Rosenbrock from (-1, 1)") {
    int evals = 0;
    auto f = [&](std::span<const double> x) {
        ++evals;
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    const std::vector<double> x0 = {-1.0, 1.0};
    CobylaResult r = cobyla_minimize(f, x0);
    CHECK(std::abs(r.x_best[0] - 1.0) < 1e-2);
    CHECK(std::abs(r.x_best[1] - 1.0) < 1e-2);
    CHECK(evals == r.n_evals);
    CHECK(r.n_evals <= 2000 + 3);
}

TEST_CASE("cobyla: exhausted budget returns f(x0) as best") {
    auto f = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1] + 5.0; };
    const std::vector<double> x0 = {1.0, 1.0};
    CobylaConfig cfg;
    cfg.max_evals = 1;
    CobylaResult r = cobyla_minimize(f, x0, cfg);
    CHECK(r.status == CobylaStatus::MaxEvalsExceeded);
    CHECK(r.f_best == doctest::Approx(7.0));
    CHECK(r.n_evals == 1);
}

TEST_CASE("cobyla: never returns a point worse than the start") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const double cx = rng.uniform(-3, 3), cy = rng.uniform(-3, 3);
        const double wobble = rng.uniform(0.5, 3.0);
        auto f = [&](std::span<const double> x) {
            return wobble * std::pow(x[0] - cx, 2) + std::pow(x[1] - cy, 2) +
                   std::sin(3 * x[0]) * 0.3;
        };
        const std::vector<double> x0 = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const double f_start = f(x0);
        CobylaConfig cfg;
        cfg.max_evals = 120;
        CobylaResult r = cobyla_minimize(f, x0, cfg);
        CHECK(r.f_best <= f_start);
        CHECK(r.n_evals <= cfg.max_evals);
    }
}

TEST_CASE("cobyla: deterministic given the same start") {
    auto f = [](std::span<const double> x) {
        return std::cos(x[0]) + 0.1 * x[0] * x[0] + std::abs(x[1]);
    };
    const std::vector<double> x0 = {0.7, -0.4};
    CobylaResult a = cobyla_minimize(f, x0);
    CobylaResult b = cobyla_minimize(f, x0);
    CHECK(a.f_best == b.f_best);
    CHECK(a.n_evals == b.n_evals);
    CHECK(a.x_best == b.x_best);
}

TEST_CASE("cobyla: rejects a bad radius configuration") {
    auto f = [](std::span<const double> x) { return x[0]; };
    CobylaConfig cfg;
    cfg.rho_end = 1.0;
    cfg.rho_begin = 0.5;
    const std::vector<double> x0 = {0.0};
    CHECK_THROWS_AS(cobyla_minimize(f, x0, cfg), std::invalid_argument);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    std::vector<double> params = {0.5, -1.0};
    const std::vector<double> grads = {0.0, 0.0};
    AdamState state(2);
    adam_step(params, grads, state);
    CHECK(params[0] == doctest::Approx(0.5));
    CHECK(params[1] == doctest::Approx(-1.0));
    CHECK(state.t == 1);
}

TEST_CASE("adam: first-step magnitude matches the hand evaluation") {
    // m-hat = 2, v-hat = 4, delta = -lr * 2 / (2 + eps)
    std::vector<double> params = {0.0};
    const std::vector<double> grads = {2.0};
    AdamState state(1);
    adam_step(params, grads, state);
    CHECK(params[0] == doctest::Approx(-0.000999999995).epsilon(1e-9));
}

TEST_CASE("adam: constant gradient moves monotonically against its sign") {
    std::vector<double> params = {1.0};
    const std::vector<double> grads = {3.0};
    AdamState state(1);
    adam_step(params, grads, state);
    const double after_one = params[0];
    adam_step(params, grads, state);
    CHECK(after_one < 1.0);
    CHECK(params[0] < after_one);
}

TEST_CASE("adam: length mismatch throws") {
    std::vector<double> params = {1.0, 2.0};
    const std::vector<double> grads = {0.0};
    AdamState state(2);
    CHECK_THROWS_AS(adam_step(params, grads, state), LengthMismatch);
}

TEST_CASE("finite differences: analytic gradients") {
    auto sum_sq = [](std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; };
    const std::vector<double> x = {1.0, 2.0};
    const auto g = finite_difference_grad(sum_sq, x);
    CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));

    auto constant = [](std::span<const double>) { return 3.5; };
    for (double gi : finite_difference_grad(constant, x)) CHECK(std::abs(gi) < 1e-9);

    auto prod = [](std::span<const double> v) { return v[0] * v[1]; };
    const std::vector<double> p = {3.0, 5.0};
    const auto gp = finite_difference_grad(prod, p);
    CHECK(gp[0] == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(gp[1] == doctest::Approx(3.0).epsilon(1e-6));
}
