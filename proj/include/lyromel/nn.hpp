#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lyromel/matrix.hpp"
#include "lyromel/rng.hpp"

namespace lyromel {

enum class Activation { relu, tanh, sigmoid, linear };

double apply_activation(Activation a, double z);
// Derivative expressed through the activation output y = act(z).
double activation_derivative_from_output(Activation a, double y);

double sigmoid(double z);

struct DenseParams {
    Matrix weight;             // out × in
    std::vector<double> bias;  // out
    Activation activation = Activation::linear;

    std::size_t out_size() const { return weight.rows(); }
    std::size_t in_size() const { return weight.cols(); }
};

// Gate weights act on the concatenation [h_{t-1}, x_t]: the first `hidden`
// columns multiply the previous output, the rest multiply the step input.
struct LstmCellParams {
    Matrix w_input, w_forget, w_output, w_candidate;  // hidden × (hidden+input)
    std::vector<double> b_input, b_forget, b_output, b_candidate;

    std::size_t hidden_size() const { return w_input.rows(); }
    std::size_t input_size() const { return w_input.cols() - w_input.rows(); }
};

struct LstmState {
    std::vector<double> h;  // cell output h_t
    std::vector<double> c;  // cell memory c_t
};

LstmState zero_state(std::size_t hidden);

struct DenseGrad {
    Matrix weight;
    std::vector<double> bias;
};

struct LstmGrad {
    Matrix w_input, w_forget, w_output, w_candidate;
    std::vector<double> b_input, b_forget, b_output, b_candidate;
};

DenseGrad zero_grad(const DenseParams& p);
LstmGrad zero_grad(const LstmCellParams& p);

// Uniform init in [-0.08, 0.08].
DenseParams make_dense(std::size_t out, std::size_t in, Activation act, Rng& rng);
LstmCellParams make_lstm(std::size_t hidden, std::size_t input, Rng& rng);

// ---- Forward ----------------------------------------------------------------

LstmState lstm_step(const LstmCellParams& p, std::span<const double> x, const LstmState& prev);
std::vector<LstmState> lstm_sequence_forward(const LstmCellParams& p,
                                             std::span<const std::vector<double>> inputs,
                                             const LstmState& init);
std::vector<double> dense_forward(const DenseParams& p, std::span<const double> x);

// Batched columns-are-examples forms used by training. A recorded step keeps
// everything backprop needs.
struct LstmStepCache {
    Matrix hx;                            // (hidden+input) × m
    Matrix gate_i, gate_f, gate_o, cand;  // hidden × m, post-activation
    Matrix c_prev, c, tanh_c;             // hidden × m
};

struct DenseCache {
    Matrix input;   // in × m
    Matrix output;  // out × m, post-activation
};

// x: input × m. Updates h, c (hidden × m) in place; records into *cache if given.
void lstm_step_batch(const LstmCellParams& p, const Matrix& x, Matrix& h, Matrix& c,
                     LstmStepCache* cache);
Matrix dense_forward_batch(const DenseParams& p, const Matrix& x, DenseCache* cache);

// ---- Backward ---------------------------------------------------------------

// One step of backprop through time. dh/dc are the total incoming gradients at
// h_t and c_t. Parameter gradients accumulate into `grads`.
struct LstmStepBack {
    Matrix dh_prev;  // hidden × m
    Matrix dc_prev;  // hidden × m
    Matrix dx;       // input × m
};
LstmStepBack lstm_backward_step(const LstmCellParams& p, const LstmStepCache& cache,
                                const Matrix& dh, const Matrix& dc, LstmGrad& grads);

// Returns d_input; accumulates into grads.
Matrix dense_backward(const DenseParams& p, const DenseCache& cache, const Matrix& d_out,
                      DenseGrad& grads);

// Records a batched forward over a whole sequence and plays it backwards.
// backward() without a recorded forward is a state error (std::logic_error).
class LstmSequenceRun {
public:
    explicit LstmSequenceRun(const LstmCellParams& p) : params_(&p) {}

    // xs: one (input × m) matrix per step. Returns h_t per step.
    std::vector<Matrix> forward(std::span<const Matrix> xs, const Matrix& h0, const Matrix& c0);

    // dh_per_step: gradient arriving at h_t from above (may be empty matrices
    // for steps with no external gradient). Optionally emits d_x per step.
    LstmGrad backward(std::span<const Matrix> dh_per_step,
                      std::vector<Matrix>* dx_per_step = nullptr) const;

private:
    const LstmCellParams* params_;
    std::vector<LstmStepCache> steps_;
    std::size_t batch_ = 0;
};

// ---- Updates ----------------------------------------------------------------

// θ ← θ − lr·g. lr = 0 is a no-op; negative lr is invalid. Note that two
// sequential updates equal one update with summed gradients only when both
// gradients were computed at the same parameter point.
void sgd_update(DenseParams& p, const DenseGrad& g, double lr);
void sgd_update(LstmCellParams& p, const LstmGrad& g, double lr);

// Epoch learning rate: 0.1 · 0.995^epoch.
double lr_schedule(std::size_t epoch);

// ---- Parameter flattening and checkpoints ------------------------------------

// Mutable views over every parameter scalar, in a stable order. Used by the
// finite-difference checks and generic serialization.
struct ParamRef {
    std::string name;
    std::span<double> values;
};
std::vector<ParamRef> param_refs(DenseParams& p, const std::string& prefix);
std::vector<ParamRef> param_refs(LstmCellParams& p, const std::string& prefix);
std::vector<ParamRef> param_refs(DenseGrad& g, const std::string& prefix);
std::vector<ParamRef> param_refs(LstmGrad& g, const std::string& prefix);

struct NamedTensor {
    std::string name;
    std::uint64_t rows = 0, cols = 0;
    std::vector<double> values;  // row-major, rows·cols entries
};

// Versioned binary container; load(save(t)) round-trips bit-exactly.
void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

std::vector<NamedTensor> to_tensors(const DenseParams& p, const std::string& prefix);
std::vector<NamedTensor> to_tensors(const LstmCellParams& p, const std::string& prefix);

// Lookup helpers for reassembling parameter structs from a tensor container.
const NamedTensor& find_tensor(std::span<const NamedTensor> tensors, const std::string& name);
Matrix tensor_matrix(const NamedTensor& t);
std::vector<double> tensor_vector(const NamedTensor& t);

} // namespace lyromel
