#include "qdgen/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qdgen/optim.hpp"

namespace qdgen::neural {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Layout {
    size_t embedding, w[4], b[4], proj, w_out, b_out, total;
};

Layout layout_of(const LstmDims& d) {
    Layout L{};
    const size_t vocab = static_cast<size_t>(d.vocab_size);
    const size_t embed = static_cast<size_t>(d.embed_dim);
    const size_t hidden = static_cast<size_t>(d.hidden_dim);
    const size_t z = static_cast<size_t>(d.z_dim());
    size_t off = 0;
    L.embedding = off;
    off += vocab * embed;
    for (int g = 0; g < 4; ++g) {
        L.w[g] = off;
        off += hidden * z;
    }
    for (int g = 0; g < 4; ++g) {
        L.b[g] = off;
        off += hidden;
    }
    L.proj = off;
    if (d.mode == PriorMode::Add) off += static_cast<size_t>(d.n_qubits) * embed;
    L.w_out = off;
    off += vocab * hidden;
    L.b_out = off;
    off += vocab;
    L.total = off;
    return L;
}

void check_token(int id, int vocab) {
    if (id < 0 || id >= vocab)
        throw UnknownTokenId("token id " + std::to_string(id) + " outside vocabulary");
}

}  // namespace

LstmParams LstmParams::zeros(const LstmDims& dims) {
    LstmParams p;
    p.dims = dims;
    p.data.assign(layout_of(dims).total, 0.0);
    return p;
}

LstmParams LstmParams::init(const LstmDims& dims, Rng& rng) {
    LstmParams p = zeros(dims);
    const Layout L = layout_of(dims);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
    auto fill = [&](size_t begin, size_t count, double s) {
        for (size_t i = 0; i < count; ++i) p.data[begin + i] = rng.uniform(-s, s);
    };
    fill(L.embedding, static_cast<size_t>(dims.vocab_size * dims.embed_dim), scale);
    for (int g = 0; g < 4; ++g)
        fill(L.w[g], static_cast<size_t>(dims.hidden_dim * dims.z_dim()), scale);
    // Forget-gate bias starts at +1 so early training does not flush memory.
    for (int i = 0; i < dims.hidden_dim; ++i) p.data[L.b[0] + static_cast<size_t>(i)] = 1.0;
    if (dims.mode == PriorMode::Add)
        fill(L.proj, static_cast<size_t>(dims.n_qubits * dims.embed_dim), 0.05);
    fill(L.w_out, static_cast<size_t>(dims.vocab_size * dims.hidden_dim), scale);
    return p;
}

std::span<double> LstmParams::embedding_row(int token) {
    check_token(token, dims.vocab_size);
    const Layout L = layout_of(dims);
    return {data.data() + L.embedding + static_cast<size_t>(token) * static_cast<size_t>(dims.embed_dim),
            static_cast<size_t>(dims.embed_dim)};
}
std::span<const double> LstmParams::embedding_row(int token) const {
    return const_cast<LstmParams*>(this)->embedding_row(token);
}
std::span<double> LstmParams::gate_weights(int gate) {
    const Layout L = layout_of(dims);
    return {data.data() + L.w[gate], static_cast<size_t>(dims.hidden_dim * dims.z_dim())};
}
std::span<const double> LstmParams::gate_weights(int gate) const {
    return const_cast<LstmParams*>(this)->gate_weights(gate);
}
std::span<double> LstmParams::gate_bias(int gate) {
    const Layout L = layout_of(dims);
    return {data.data() + L.b[gate], static_cast<size_t>(dims.hidden_dim)};
}
std::span<const double> LstmParams::gate_bias(int gate) const {
    return const_cast<LstmParams*>(this)->gate_bias(gate);
}
std::span<double> LstmParams::prior_projection() {
    const Layout L = layout_of(dims);
    const size_t count =
        dims.mode == PriorMode::Add ? static_cast<size_t>(dims.n_qubits * dims.embed_dim) : 0;
    return {data.data() + L.proj, count};
}
std::span<const double> LstmParams::prior_projection() const {
    return const_cast<LstmParams*>(this)->prior_projection();
}
std::span<double> LstmParams::output_weights() {
    const Layout L = layout_of(dims);
    return {data.data() + L.w_out, static_cast<size_t>(dims.vocab_size * dims.hidden_dim)};
}
std::span<const double> LstmParams::output_weights() const {
    return const_cast<LstmParams*>(this)->output_weights();
}
std::span<double> LstmParams::output_bias() {
    const Layout L = layout_of(dims);
    return {data.data() + L.b_out, static_cast<size_t>(dims.vocab_size)};
}
std::span<const double> LstmParams::output_bias() const {
    return const_cast<LstmParams*>(this)->output_bias();
}

std::vector<double> inject_prior(const qsim::BitString& prior, std::span<const double> x_t,
                                 PriorMode mode, const LstmParams& params) {
    const LstmDims& d = params.dims;
    if (prior.n_qubits != d.n_qubits)
        throw ShapeMismatch("prior length does not match n_qubits");
    if (static_cast<int>(x_t.size()) != d.embed_dim)
        throw ShapeMismatch("embedded input length does not match embed_dim");
    if (mode == PriorMode::Concat) {
        std::vector<double> out;
        out.reserve(static_cast<size_t>(d.n_qubits + d.embed_dim));
        for (int q = 0; q < d.n_qubits; ++q) out.push_back(prior.bit(q) ? 1.0 : 0.0);
        out.insert(out.end(), x_t.begin(), x_t.end());
        return out;
    }
    if (d.mode != PriorMode::Add)
        throw ShapeMismatch("params were built without a prior projection");
    std::vector<double> out(x_t.begin(), x_t.end());
    const auto proj = params.prior_projection();
    for (int q = 0; q < d.n_qubits; ++q) {
        if (!prior.bit(q)) continue;
        const size_t row = static_cast<size_t>(q) * static_cast<size_t>(d.embed_dim);
        for (int e = 0; e < d.embed_dim; ++e) out[static_cast<size_t>(e)] += proj[row + static_cast<size_t>(e)];
    }
    return out;
}

namespace {

// Shared gate computation; fills the cache vectors.
void cell_forward_into(std::span<const double> x_prime, const CellState& state,
                       const LstmParams& params, StepCache& cache) {
    const LstmDims& d = params.dims;
    const int hidden = d.hidden_dim;
    const int zdim = d.z_dim();
    if (static_cast<int>(x_prime.size()) != d.input_dim())
        throw ShapeMismatch("x' length does not match input_dim");
    if (static_cast<int>(state.h.size()) != hidden || static_cast<int>(state.c.size()) != hidden)
        throw ShapeMismatch("cell state length does not match hidden_dim");

    cache.z.resize(static_cast<size_t>(zdim));
    std::copy(state.h.begin(), state.h.end(), cache.z.begin());
    std::copy(x_prime.begin(), x_prime.end(), cache.z.begin() + hidden);

    std::vector<double>* gates[4] = {&cache.f, &cache.i, &cache.c_tilde, &cache.o};
    for (int g = 0; g < 4; ++g) {
        auto w = params.gate_weights(g);
        auto b = params.gate_bias(g);
        auto& out = *gates[g];
        out.assign(static_cast<size_t>(hidden), 0.0);
        for (int r = 0; r < hidden; ++r) {
            const double* row = w.data() + static_cast<size_t>(r) * static_cast<size_t>(zdim);
            double acc = b[static_cast<size_t>(r)];
            for (int k = 0; k < zdim; ++k) acc += row[k] * cache.z[static_cast<size_t>(k)];
            out[static_cast<size_t>(r)] = (g == 2) ? std::tanh(acc) : sigmoid(acc);
        }
    }
    cache.c.resize(static_cast<size_t>(hidden));
    cache.tanh_c.resize(static_cast<size_t>(hidden));
    cache.h.resize(static_cast<size_t>(hidden));
    for (int r = 0; r < hidden; ++r) {
        const auto k = static_cast<size_t>(r);
        cache.c[k] = cache.f[k] * state.c[k] + cache.i[k] * cache.c_tilde[k];
        cache.tanh_c[k] = std::tanh(cache.c[k]);
        cache.h[k] = cache.o[k] * cache.tanh_c[k];
    }
}

}  // namespace

CellState lstm_cell_forward(std::span<const double> x_prime, const CellState& state,
                            const LstmParams& params) {
    StepCache cache;
    cell_forward_into(x_prime, state, params, cache);
    return {cache.h, cache.c};
}

ForwardPass forward_sequence(std::span<const int> input_ids, const qsim::BitString& prior,
                             const LstmParams& params, double dropout_rate, Rng* rng) {
    const LstmDims& d = params.dims;
    if (input_ids.empty()) throw ShapeMismatch("empty input sequence");
    ForwardPass pass;
    pass.steps.reserve(input_ids.size());
    pass.logits.reserve(input_ids.size());

    CellState state = CellState::zeros(d.hidden_dim);
    const bool use_dropout = rng != nullptr && dropout_rate > 0.0;
    const auto w_out = params.output_weights();
    const auto b_out = params.output_bias();

    for (int token : input_ids) {
        check_token(token, d.vocab_size);
        StepCache cache;
        cache.token = token;
        const std::vector<double> x_prime =
            inject_prior(prior, params.embedding_row(token), d.mode, params);
        cell_forward_into(x_prime, state, params, cache);
        state.h = cache.h;
        state.c = cache.c;

        cache.h_out = cache.h;
        if (use_dropout) {
            cache.mask.resize(cache.h.size());
            if (dropout_rate >= 1.0) {
                std::fill(cache.mask.begin(), cache.mask.end(), 0.0);
            } else {
                const double keep = 1.0 - dropout_rate;
                for (double& m : cache.mask) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            }
            for (size_t k = 0; k < cache.h_out.size(); ++k) cache.h_out[k] *= cache.mask[k];
        }

        std::vector<double> logits(static_cast<size_t>(d.vocab_size));
        for (int v = 0; v < d.vocab_size; ++v) {
            const double* row =
                w_out.data() + static_cast<size_t>(v) * static_cast<size_t>(d.hidden_dim);
            double acc = b_out[static_cast<size_t>(v)];
            for (int k = 0; k < d.hidden_dim; ++k) acc += row[k] * cache.h_out[static_cast<size_t>(k)];
            logits[static_cast<size_t>(v)] = acc;
        }
        pass.steps.push_back(std::move(cache));
        pass.logits.push_back(std::move(logits));
    }
    return pass;
}

namespace {

// Stable softmax in place; returns log-sum-exp for the loss.
void softmax_inplace(std::vector<double>& v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

}  // namespace

double nll_loss(const std::vector<std::vector<double>>& logits, std::span<const int> targets,
                int pad_id) {
    if (logits.size() != targets.size())
        throw optim::LengthMismatch("logit/target step counts differ");
    double total = 0.0;
    int active = 0;
    for (size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] == pad_id) continue;
        std::vector<double> p = logits[t];
        const double mx = *std::max_element(p.begin(), p.end());
        double sum = 0.0;
        for (double x : p) sum += std::exp(x - mx);
        total += -(p[static_cast<size_t>(targets[t])] - mx - std::log(sum));
        ++active;
    }
    return active > 0 ? total / active : 0.0;
}

std::vector<double> backward_sequence(const ForwardPass& pass, std::span<const int> targets,
                                      const qsim::BitString& prior, const LstmParams& params,
                                      int pad_id) {
    const LstmDims& d = params.dims;
    const Layout L = layout_of(d);
    const int hidden = d.hidden_dim;
    const int zdim = d.z_dim();
    const size_t T = pass.steps.size();
    if (targets.size() != T) throw optim::LengthMismatch("target length != sequence length");

    std::vector<double> grad(params.data.size(), 0.0);
    int active = 0;
    for (size_t t = 0; t < T; ++t) active += targets[t] != pad_id;
    if (active == 0) return grad;
    const double inv_active = 1.0 / active;

    std::vector<double> dh_rec(static_cast<size_t>(hidden), 0.0);  // via z of t+1
    std::vector<double> dc_next(static_cast<size_t>(hidden), 0.0);
    std::vector<double> f_next;  // forget gate of step t+1

    const auto w_out = params.output_weights();
    std::vector<double> dh(static_cast<size_t>(hidden));
    std::vector<double> dz(static_cast<size_t>(zdim));
    std::vector<double> da(static_cast<size_t>(hidden));

    for (size_t t = T; t-- > 0;) {
        const StepCache& s = pass.steps[t];

        // Output head.
        std::fill(dh.begin(), dh.end(), 0.0);
        if (targets[t] != pad_id) {
            std::vector<double> dlogits = pass.logits[t];
            softmax_inplace(dlogits);
            dlogits[static_cast<size_t>(targets[t])] -= 1.0;
            for (double& x : dlogits) x *= inv_active;
            for (int v = 0; v < d.vocab_size; ++v) {
                const double dl = dlogits[static_cast<size_t>(v)];
                if (dl == 0.0) continue;
                double* wrow = grad.data() + L.w_out +
                               static_cast<size_t>(v) * static_cast<size_t>(hidden);
                const double* wsrc =
                    w_out.data() + static_cast<size_t>(v) * static_cast<size_t>(hidden);
                for (int k = 0; k < hidden; ++k) {
                    wrow[k] += dl * s.h_out[static_cast<size_t>(k)];
                    dh[static_cast<size_t>(k)] += dl * wsrc[k];
                }
                grad[L.b_out + static_cast<size_t>(v)] += dl;
            }
            // Dropout mask applies to the output path only.
            if (!s.mask.empty())
                for (int k = 0; k < hidden; ++k) dh[static_cast<size_t>(k)] *= s.mask[static_cast<size_t>(k)];
        }
        // Recurrent contribution from step t+1.
        for (int k = 0; k < hidden; ++k) dh[static_cast<size_t>(k)] += dh_rec[static_cast<size_t>(k)];

        // Through h_t = o . tanh(c_t) and c_t = f . c_{t-1} + i . c~.
        std::vector<double> dc(static_cast<size_t>(hidden));
        for (int k = 0; k < hidden; ++k) {
            const auto kk = static_cast<size_t>(k);
            dc[kk] = dh[kk] * s.o[kk] * (1.0 - s.tanh_c[kk] * s.tanh_c[kk]);
            if (!f_next.empty()) dc[kk] += dc_next[kk] * f_next[kk];
        }

        const std::vector<double>* c_prev = t > 0 ? &pass.steps[t - 1].c : nullptr;
        std::fill(dz.begin(), dz.end(), 0.0);
        for (int g = 0; g < 4; ++g) {
            for (int k = 0; k < hidden; ++k) {
                const auto kk = static_cast<size_t>(k);
                double dgate;
                switch (g) {
                case 0: dgate = dc[kk] * (c_prev ? (*c_prev)[kk] : 0.0); break;  // f
                case 1: dgate = dc[kk] * s.c_tilde[kk]; break;                   // i
                case 2: dgate = dc[kk] * s.i[kk]; break;                         // c~
                default: dgate = dh[kk] * s.tanh_c[kk]; break;                   // o
                }
                const double y = (g == 0   ? s.f[kk]
                                  : g == 1 ? s.i[kk]
                                  : g == 2 ? s.c_tilde[kk]
                                           : s.o[kk]);
                da[kk] = (g == 2) ? dgate * (1.0 - y * y) : dgate * y * (1.0 - y);
            }
            const auto w = params.gate_weights(g);
            for (int r = 0; r < hidden; ++r) {
                const double a = da[static_cast<size_t>(r)];
                if (a == 0.0) continue;
                double* wrow =
                    grad.data() + L.w[g] + static_cast<size_t>(r) * static_cast<size_t>(zdim);
                const double* wsrc = w.data() + static_cast<size_t>(r) * static_cast<size_t>(zdim);
                for (int k = 0; k < zdim; ++k) {
                    wrow[k] += a * s.z[static_cast<size_t>(k)];
                    dz[static_cast<size_t>(k)] += a * wsrc[k];
                }
                grad[L.b[g] + static_cast<size_t>(r)] += a;
            }
        }

        for (int k = 0; k < hidden; ++k) dh_rec[static_cast<size_t>(k)] = dz[static_cast<size_t>(k)];
        dc_next = dc;
        f_next = s.f;

        // Input path: embedding and (add mode) the prior projection.
        const double* dx = dz.data() + hidden;
        double* emb = grad.data() + L.embedding +
                      static_cast<size_t>(s.token) * static_cast<size_t>(d.embed_dim);
        if (d.mode == PriorMode::Concat) {
            for (int e = 0; e < d.embed_dim; ++e) emb[e] += dx[d.n_qubits + e];
        } else {
            for (int e = 0; e < d.embed_dim; ++e) emb[e] += dx[e];
            for (int q = 0; q < d.n_qubits; ++q) {
                if (!prior.bit(q)) continue;
                double* prow = grad.data() + L.proj +
                               static_cast<size_t>(q) * static_cast<size_t>(d.embed_dim);
                for (int e = 0; e < d.embed_dim; ++e) prow[e] += dx[e];
            }
        }
    }
    return grad;
}

double backward_batch(std::span<const BatchItem> batch, const LstmParams& params,
                      double dropout_rate, Rng* rng, int pad_id, std::vector<double>& grad_out) {
    if (batch.empty()) throw optim::LengthMismatch("empty batch");
    grad_out.assign(params.data.size(), 0.0);
    double loss = 0.0;
    for (const BatchItem& item : batch) {
        ForwardPass pass = forward_sequence(item.input_ids, item.prior, params, dropout_rate, rng);
        loss += nll_loss(pass.logits, item.target_ids, pad_id);
        const std::vector<double> g =
            backward_sequence(pass, item.target_ids, item.prior, params, pad_id);
        for (size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad_out) g *= inv;
    return loss * inv;
}

std::vector<int> sample_sequence(const qsim::BitString& prior, const LstmParams& params,
                                 const GenConfig& gen, Rng& rng) {
    const LstmDims& d = params.dims;
    CellState state = CellState::zeros(d.hidden_dim);
    const auto w_out = params.output_weights();
    const auto b_out = params.output_bias();

    std::vector<int> out;
    int token = gen.start_id;
    for (int step = 0; step < gen.max_len; ++step) {
        StepCache cache;
        const std::vector<double> x_prime =
            inject_prior(prior, params.embedding_row(token), d.mode, params);
        cell_forward_into(x_prime, state, params, cache);
        state.h = cache.h;
        state.c = cache.c;

        std::vector<double> logits(static_cast<size_t>(d.vocab_size));
        for (int v = 0; v < d.vocab_size; ++v) {
            const double* row =
                w_out.data() + static_cast<size_t>(v) * static_cast<size_t>(d.hidden_dim);
            double acc = b_out[static_cast<size_t>(v)];
            for (int k = 0; k < d.hidden_dim; ++k) acc += row[k] * cache.h[static_cast<size_t>(k)];
            logits[static_cast<size_t>(v)] = acc;
        }
        // Never emit padding or a second start token.
        logits[0] = -std::numeric_limits<double>::infinity();
        logits[static_cast<size_t>(gen.start_id)] = -std::numeric_limits<double>::infinity();

        int next;
        if (gen.temperature <= 1e-12) {
            next = static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                                    logits.begin());
        } else {
            const double mx = *std::max_element(logits.begin(), logits.end());
            double sum = 0.0;
            std::vector<double> p(logits.size(), 0.0);
            for (size_t v = 0; v < logits.size(); ++v) {
                if (std::isinf(logits[v])) continue;
                p[v] = std::exp((logits[v] - mx) / gen.temperature);
                sum += p[v];
            }
            double u = rng.uniform() * sum;
            next = static_cast<int>(logits.size()) - 1;
            for (size_t v = 0; v < p.size(); ++v) {
                u -= p[v];
                if (u <= 0.0) {
                    next = static_cast<int>(v);
                    break;
                }
            }
        }
        if (next == gen.end_id) break;
        out.push_back(next);
        token = next;
    }
    return out;
}

}  // namespace qdgen::neural
