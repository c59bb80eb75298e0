#include "qdgen/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qdgen::optim {

namespace {

// Solves A x = b by Gaussian elimination with partial pivoting; false when
// the system is numerically singular.
bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double>& x) {
    const size_t n = b.size();
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-14) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (size_t r = col + 1; r < n; ++r) {
            const double factor = a[r][col] / a[col][col];
            for (size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    x.assign(n, 0.0);
    for (size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (size_t c = r + 1; c < n; ++c) acc -= a[r][c] * x[c];
        x[r] = acc / a[r][r];
    }
    return true;
}

struct Budget {
    const Objective& f;
    int max_evals;
    int used = 0;
    std::vector<double> best_x;
    double best_f = std::numeric_limits<double>::infinity();

    bool eval(std::span<const double> x, double& out) {
        if (used >= max_evals) return false;
        ++used;
        out = f(x);
        if (out < best_f) {
            best_f = out;
            best_x.assign(x.begin(), x.end());
        }
        return true;
    }
};

}  // namespace

CobylaResult cobyla_minimize(const Objective& objective, std::span<const double> x0,
                             const CobylaConfig& config) {
    if (!(config.rho_end > 0.0 && config.rho_end < config.rho_begin))
        throw std::invalid_argument("require 0 < rho_end < rho_begin");
    const size_t n = x0.size();
    Budget budget{objective, config.max_evals};

    auto finish = [&](CobylaStatus status) {
        CobylaResult r;
        r.x_best = budget.best_x;
        r.f_best = budget.best_f;
        r.n_evals = budget.used;
        r.status = status;
        return r;
    };

    double f0;
    if (!budget.eval(x0, f0)) {
        // No budget at all; report x0 unevaluated as best-effort.
        CobylaResult r;
        r.x_best.assign(x0.begin(), x0.end());
        r.f_best = std::numeric_limits<double>::quiet_NaN();
        r.n_evals = 0;
        r.status = CobylaStatus::MaxEvalsExceeded;
        return r;
    }
    if (n == 0) return finish(CobylaStatus::Converged);

    // Simplex: slot 0 is the incumbent best vertex.
    std::vector<std::vector<double>> points(n + 1, std::vector<double>(n));
    std::vector<double> values(n + 1);
    points[0].assign(x0.begin(), x0.end());
    values[0] = f0;

    double rho = config.rho_begin;
    for (size_t i = 0; i < n; ++i) {
        points[i + 1] = points[0];
        points[i + 1][i] += rho;
        if (!budget.eval(points[i + 1], values[i + 1]))
            return finish(CobylaStatus::MaxEvalsExceeded);
    }

    // Geometry repairs replace one vertex at a time so the rest of the
    // simplex keeps the curvature information it has accumulated.
    size_t repair_axis = 0;
    int tight_failures = 0;
    auto repair_vertex = [&](size_t idx) -> bool {
        points[idx] = points[0];
        points[idx][repair_axis] += rho;
        repair_axis = (repair_axis + 1) % n;
        return budget.eval(points[idx], values[idx]);
    };

    std::vector<double> grad, x_new(n), x_try(n);
    std::vector<double> last_dir;  // unit direction of the last accepted move
    for (;;) {
        // Keep the best vertex in slot 0.
        size_t best = 0, worst = 0;
        for (size_t i = 1; i <= n; ++i) {
            if (values[i] < values[best]) best = i;
            if (values[i] > values[worst]) worst = i;
        }
        if (best != 0) {
            std::swap(points[0], points[best]);
            std::swap(values[0], values[best]);
            if (worst == 0) worst = best;
        }

        // Linear model by interpolation: rows are edge vectors.
        std::vector<std::vector<double>> bt(n, std::vector<double>(n));
        std::vector<double> df(n);
        for (size_t i = 0; i < n; ++i) {
            for (size_t c = 0; c < n; ++c) bt[i][c] = points[i + 1][c] - points[0][c];
            df[i] = values[i + 1] - values[0];
        }
        const bool model_ok = solve_linear(std::move(bt), std::move(df), grad);

        // Attempts a descent move along `dir` (unit length): full radius
        // first, half on overshoot, then doubling extensions while the value
        // keeps dropping. Returns 1 on improvement over the best vertex,
        // 0 on failure, -1 when the budget ran out.
        auto attempt = [&](const std::vector<double>& dir) -> int {
            for (size_t c = 0; c < n; ++c) x_new[c] = points[0][c] + rho * dir[c];
            double f_new;
            if (!budget.eval(x_new, f_new)) return -1;
            if (f_new >= values[0]) {
                for (size_t c = 0; c < n; ++c) x_try[c] = points[0][c] + 0.5 * rho * dir[c];
                double f_half;
                if (!budget.eval(x_try, f_half)) return -1;
                if (f_half < f_new) {
                    x_new = x_try;
                    f_new = f_half;
                }
            }
            const bool better = f_new < values[0];
            if (better) {
                double step = rho;
                while (step < 64.0 * config.rho_begin) {
                    for (size_t c = 0; c < n; ++c)
                        x_try[c] = points[0][c] + 2.0 * step * dir[c];
                    double f_try;
                    if (!budget.eval(x_try, f_try)) return -1;
                    if (f_try >= f_new) break;
                    x_new = x_try;
                    f_new = f_try;
                    step *= 2.0;
                }
                last_dir.resize(n);
                double norm = 0.0;
                for (size_t c = 0; c < n; ++c) {
                    last_dir[c] = x_new[c] - points[0][c];
                    norm += last_dir[c] * last_dir[c];
                }
                norm = std::sqrt(norm);
                if (norm > 0.0)
                    for (double& d : last_dir) d /= norm;
            }
            if (f_new < values[worst]) {
                // Even a non-improving probe refines the model.
                points[worst] = x_new;
                values[worst] = f_new;
            }
            return better ? 1 : 0;
        };

        int outcome = 0;
        if (model_ok) {
            double gnorm = 0.0;
            for (double gi : grad) gnorm += gi * gi;
            gnorm = std::sqrt(gnorm);
            if (gnorm > 1e-14) {
                for (double& gi : grad) gi /= -gnorm;
                outcome = attempt(grad);
            }
        }
        if (outcome == 0 && !last_dir.empty()) {
            // The interpolated direction degrades in curved valleys; the
            // last accepted direction often still descends.
            outcome = attempt(last_dir);
            if (outcome == 0) last_dir.clear();
        }
        if (outcome < 0) return finish(CobylaStatus::MaxEvalsExceeded);
        if (outcome == 1) {
            tight_failures = 0;
            continue;
        }
        const bool stepped = model_ok;

        // No progress. A singular model means some vertex collapsed onto
        // another: rebuild the closest one. Stale geometry (a vertex far
        // outside the radius) gets the farthest pulled in. Only when the
        // simplex is tight and the step still failed is this scale done.
        size_t far_idx = 1, near_idx = 1;
        double far_dist = -1.0, near_dist = std::numeric_limits<double>::infinity();
        for (size_t i = 1; i <= n; ++i) {
            double dist = 0.0;
            for (size_t c = 0; c < n; ++c) {
                const double d = points[i][c] - points[0][c];
                dist += d * d;
            }
            if (dist > far_dist) {
                far_dist = dist;
                far_idx = i;
            }
            if (dist < near_dist) {
                near_dist = dist;
                near_idx = i;
            }
        }
        if (!model_ok) {
            if (!repair_vertex(near_idx)) return finish(CobylaStatus::MaxEvalsExceeded);
            continue;
        }
        (void)stepped;
        if (far_dist > 2.1 * 2.1 * rho * rho) {
            if (!repair_vertex(far_idx)) return finish(CobylaStatus::MaxEvalsExceeded);
            continue;
        }
        // Give the model one refresh (replace the worst vertex) before
        // concluding that this radius is exhausted.
        if (++tight_failures < 2) {
            if (!repair_vertex(worst == 0 ? far_idx : worst))
                return finish(CobylaStatus::MaxEvalsExceeded);
            continue;
        }
        tight_failures = 0;
        rho *= 0.5;
        if (rho < config.rho_end) return finish(CobylaStatus::Converged);
    }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw LengthMismatch("adam_step: parameter/gradient/state lengths differ");
    const AdamConfig& c = state.config;
    state.t += 1;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

std::vector<double> finite_difference_grad(const Objective& f, std::span<const double> x,
                                           double h) {
    std::vector<double> grad(x.size());
    std::vector<double> probe(x.begin(), x.end());
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace qdgen::optim
