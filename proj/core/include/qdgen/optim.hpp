// Optimizers: a derivative-free linear-approximation trust-region method for
// the quantum circuit parameters, Adam for the sequence model, and central
// finite differences as a testing oracle.
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace qdgen::optim {

struct CobylaConfig {
    double rho_begin = 0.5;  // initial trust radius, radians for angle params
    double rho_end = 1e-4;
    int max_evals = 2000;
};

enum class CobylaStatus { Converged, MaxEvalsExceeded };

struct CobylaResult {
    std::vector<double> x_best;
    double f_best = 0.0;
    int n_evals = 0;
    CobylaStatus status = CobylaStatus::Converged;
};

using Objective = std::function<double(std::span<const double>)>;

// Unconstrained COBYLA-style descent: keeps a simplex of n+1 points, fits a
// linear model by interpolation, steps the trust radius along the model's
// steepest descent and shrinks the radius from rho_begin to rho_end when no
// progress is possible at the current scale. Deterministic given x0; never
// returns a point worse than f(x0). Evaluation count is hard-capped at
// max_evals; exhausting it yields MaxEvalsExceeded carrying the best so far.
CobylaResult cobyla_minimize(const Objective& objective, std::span<const double> x0,
                             const CobylaConfig& config = {});

class LengthMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    explicit AdamState(size_t n_params, const AdamConfig& cfg = {})
        : config(cfg), m(n_params, 0.0), v(n_params, 0.0) {}
};

// Standard bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Central differences per coordinate.
std::vector<double> finite_difference_grad(const Objective& f, std::span<const double> x,
                                           double h = 1e-5);

}  // namespace qdgen::optim
