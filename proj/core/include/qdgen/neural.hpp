// Single-layer LSTM over SELFIES token ids with a quantum-prior bitstring
// injected at every timestep, either concatenated to the embedded token or
// added through a learned projection. Exact BPTT gradients; inverted dropout
// on the output connection of h_t (the recurrent path stays undropped).
#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qdgen/qsim.hpp"
#include "qdgen/rng.hpp"

namespace qdgen::neural {

enum class PriorMode { Concat, Add };

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnknownTokenId : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

struct LstmDims {
    int vocab_size = 0;
    int embed_dim = 128;
    int hidden_dim = 256;
    int n_qubits = 16;
    PriorMode mode = PriorMode::Concat;

    int input_dim() const { return mode == PriorMode::Concat ? embed_dim + n_qubits : embed_dim; }
    int z_dim() const { return hidden_dim + input_dim(); }
};

// All parameters live in one flat buffer so the optimizer and checkpoints
// can treat them uniformly; the named accessors give shaped views.
class LstmParams {
public:
    LstmDims dims;
    std::vector<double> data;

    static LstmParams zeros(const LstmDims& dims);
    // Uniform +-1/sqrt(hidden) weights, forget-gate bias +1, prior projection
    // +-0.05.
    static LstmParams init(const LstmDims& dims, Rng& rng);

    size_t size() const { return data.size(); }

    std::span<double> embedding_row(int token);
    std::span<const double> embedding_row(int token) const;
    // Gate weight rows: gate in {f,i,c,o} indexed 0..3.
    std::span<double> gate_weights(int gate);
    std::span<const double> gate_weights(int gate) const;
    std::span<double> gate_bias(int gate);
    std::span<const double> gate_bias(int gate) const;
    std::span<double> prior_projection();  // n_qubits x embed_dim, Add mode only
    std::span<const double> prior_projection() const;
    std::span<double> output_weights();  // vocab x hidden
    std::span<const double> output_weights() const;
    std::span<double> output_bias();
    std::span<const double> output_bias() const;
};

struct CellState {
    std::vector<double> h;
    std::vector<double> c;

    static CellState zeros(int hidden_dim) {
        return {std::vector<double>(static_cast<size_t>(hidden_dim), 0.0),
                std::vector<double>(static_cast<size_t>(hidden_dim), 0.0)};
    }
};

struct GenConfig {
    double temperature = 1.0;
    int max_len = 96;
    int start_id = 1;
    int end_id = 2;
};

// Prior bits merged with an embedded input: concat prepends the bits as 0/1
// reals; add applies the learned projection row-sum for set bits.
std::vector<double> inject_prior(const qsim::BitString& prior, std::span<const double> x_t,
                                 PriorMode mode, const LstmParams& params);

// One cell update (eqs f,i,o = sigma(W.[h,x']+b), c_t = f.c + i.tanh-cand,
// h_t = o.tanh(c_t)).
CellState lstm_cell_forward(std::span<const double> x_prime, const CellState& state,
                            const LstmParams& params);

struct StepCache {
    int token = 0;
    std::vector<double> z;        // [h_prev, x']
    std::vector<double> f, i, c_tilde, o;
    std::vector<double> c, tanh_c, h;
    std::vector<double> mask;     // inverted-dropout mask; empty when disabled
    std::vector<double> h_out;    // h after mask, feeds the output head
};

struct ForwardPass {
    std::vector<StepCache> steps;
    std::vector<std::vector<double>> logits;  // per step, vocab_size
};

// Teacher-forced pass over input ids. rng == nullptr or dropout_rate <= 0
// disables dropout (evaluation mode); dropout_rate >= 1 zeroes h entirely.
ForwardPass forward_sequence(std::span<const int> input_ids, const qsim::BitString& prior,
                             const LstmParams& params, double dropout_rate, Rng* rng);

// Mean over non-PAD target positions of -ln softmax(logits)[target].
double nll_loss(const std::vector<std::vector<double>>& logits, std::span<const int> targets,
                int pad_id);

// Exact gradient of nll_loss for one sequence, same flat layout as params.
std::vector<double> backward_sequence(const ForwardPass& pass, std::span<const int> targets,
                                      const qsim::BitString& prior, const LstmParams& params,
                                      int pad_id);

struct BatchItem {
    std::vector<int> input_ids;
    std::vector<int> target_ids;
    qsim::BitString prior;
};

// Mean loss and mean gradient over the batch; dropout masks are drawn from
// rng in batch order.
double backward_batch(std::span<const BatchItem> batch, const LstmParams& params,
                      double dropout_rate, Rng* rng, int pad_id, std::vector<double>& grad_out);

// Autoregressive sampling: start token, softmax(logits/temperature) draws,
// prior injected at every step, stops at END or max_len. PAD and START are
// masked out of the draw.
std::vector<int> sample_sequence(const qsim::BitString& prior, const LstmParams& params,
                                 const GenConfig& gen, Rng& rng);

}  // namespace qdgen::neural
