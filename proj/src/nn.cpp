#include "lyromel/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lyromel {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double apply_activation(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::sigmoid: return sigmoid(z);
        case Activation::linear: return z;
    }
    return z;
}

double activation_derivative_from_output(Activation a, double y) {
    switch (a) {
        case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

LstmState zero_state(std::size_t hidden) {
    return LstmState{std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)};
}

DenseGrad zero_grad(const DenseParams& p) {
    return DenseGrad{Matrix(p.weight.rows(), p.weight.cols()), std::vector<double>(p.bias.size(), 0.0)};
}

LstmGrad zero_grad(const LstmCellParams& p) {
    const std::size_t h = p.w_input.rows();
    const std::size_t c = p.w_input.cols();
    LstmGrad g;
    g.w_input = Matrix(h, c);
    g.w_forget = Matrix(h, c);
    g.w_output = Matrix(h, c);
    g.w_candidate = Matrix(h, c);
    g.b_input.assign(h, 0.0);
    g.b_forget.assign(h, 0.0);
    g.b_output.assign(h, 0.0);
    g.b_candidate.assign(h, 0.0);
    return g;
}

namespace {

constexpr double kInitRange = 0.08;

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-kInitRange, kInitRange);
    return m;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-kInitRange, kInitRange);
    return v;
}

} // namespace

DenseParams make_dense(std::size_t out, std::size_t in, Activation act, Rng& rng) {
    DenseParams p;
    p.weight = random_matrix(out, in, rng);
    p.bias = random_vector(out, rng);
    p.activation = act;
    return p;
}

LstmCellParams make_lstm(std::size_t hidden, std::size_t input, Rng& rng) {
    LstmCellParams p;
    const std::size_t cols = hidden + input;
    p.w_input = random_matrix(hidden, cols, rng);
    p.w_forget = random_matrix(hidden, cols, rng);
    p.w_output = random_matrix(hidden, cols, rng);
    p.w_candidate = random_matrix(hidden, cols, rng);
    p.b_input = random_vector(hidden, rng);
    p.b_forget = random_vector(hidden, rng);
    p.b_output = random_vector(hidden, rng);
    p.b_candidate = random_vector(hidden, rng);
    return p;
}

// ---- Forward ----------------------------------------------------------------

void lstm_step_batch(const LstmCellParams& p, const Matrix& x, Matrix& h, Matrix& c,
                     LstmStepCache* cache) {
    const std::size_t hidden = p.hidden_size();
    const std::size_t input = p.input_size();
    if (x.rows() != input) throw ShapeError("lstm_step: input size mismatch");
    if (h.rows() != hidden || c.rows() != hidden || h.cols() != x.cols() || c.cols() != x.cols()) {
        throw ShapeError("lstm_step: state shape mismatch");
    }
    const std::size_t m = x.cols();

    Matrix hx(hidden + input, m);
    for (std::size_t r = 0; r < hidden; ++r) std::memcpy(hx.row(r), h.row(r), m * sizeof(double));
    for (std::size_t r = 0; r < input; ++r) std::memcpy(hx.row(hidden + r), x.row(r), m * sizeof(double));

    Matrix zi = kernels::matmul(p.w_input, hx);
    Matrix zf = kernels::matmul(p.w_forget, hx);
    Matrix zo = kernels::matmul(p.w_output, hx);
    Matrix zc = kernels::matmul(p.w_candidate, hx);

    Matrix c_prev = c;
    Matrix tanh_c(hidden, m);
    for (std::size_t r = 0; r < hidden; ++r) {
        double* pi = zi.row(r);
        double* pf = zf.row(r);
        double* po = zo.row(r);
        double* pc = zc.row(r);
        const double* pcp = c_prev.row(r);
        double* ph = h.row(r);
        double* pcn = c.row(r);
        double* ptc = tanh_c.row(r);
        for (std::size_t j = 0; j < m; ++j) {
            const double i = sigmoid(pi[j] + p.b_input[r]);
            const double f = sigmoid(pf[j] + p.b_forget[r]);
            const double o = sigmoid(po[j] + p.b_output[r]);
            const double g = std::tanh(pc[j] + p.b_candidate[r]);
            const double cn = f * pcp[j] + i * g;
            const double tc = std::tanh(cn);
            pi[j] = i;
            pf[j] = f;
            po[j] = o;
            pc[j] = g;
            pcn[j] = cn;
            ptc[j] = tc;
            ph[j] = o * tc;
        }
    }

    if (cache) {
        cache->hx = std::move(hx);
        cache->gate_i = std::move(zi);
        cache->gate_f = std::move(zf);
        cache->gate_o = std::move(zo);
        cache->cand = std::move(zc);
        cache->c_prev = std::move(c_prev);
        cache->c = c;
        cache->tanh_c = std::move(tanh_c);
    }
}

LstmState lstm_step(const LstmCellParams& p, std::span<const double> x, const LstmState& prev) {
    const std::size_t hidden = p.hidden_size();
    if (x.size() != p.input_size()) throw ShapeError("lstm_step: input size mismatch");
    if (prev.h.size() != hidden || prev.c.size() != hidden) {
        throw ShapeError("lstm_step: state size mismatch");
    }
    Matrix xm(x.size(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) xm(i, 0) = x[i];
    Matrix h(hidden, 1), c(hidden, 1);
    for (std::size_t i = 0; i < hidden; ++i) {
        h(i, 0) = prev.h[i];
        c(i, 0) = prev.c[i];
    }
    lstm_step_batch(p, xm, h, c, nullptr);
    LstmState out = zero_state(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
        out.h[i] = h(i, 0);
        out.c[i] = c(i, 0);
    }
    return out;
}

std::vector<LstmState> lstm_sequence_forward(const LstmCellParams& p,
                                             std::span<const std::vector<double>> inputs,
                                             const LstmState& init) {
    if (inputs.empty()) throw std::invalid_argument("lstm_sequence_forward: empty input sequence");
    std::vector<LstmState> out;
    out.reserve(inputs.size());
    const LstmState* prev = &init;
    for (const auto& x : inputs) {
        out.push_back(lstm_step(p, x, *prev));
        prev = &out.back();
    }
    return out;
}

Matrix dense_forward_batch(const DenseParams& p, const Matrix& x, DenseCache* cache) {
    if (x.rows() != p.in_size()) throw ShapeError("dense_forward: input size mismatch");
    Matrix y = kernels::matmul(p.weight, x);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        double* py = y.row(r);
        const double b = p.bias[r];
        for (std::size_t j = 0; j < y.cols(); ++j) py[j] = apply_activation(p.activation, py[j] + b);
    }
    if (cache) {
        cache->input = x;
        cache->output = y;
    }
    return y;
}

std::vector<double> dense_forward(const DenseParams& p, std::span<const double> x) {
    if (x.size() != p.in_size()) throw ShapeError("dense_forward: input size mismatch");
    Matrix xm(x.size(), 1);
    for (std::size_t i = 0; i < x.size(); ++i) xm(i, 0) = x[i];
    Matrix y = dense_forward_batch(p, xm, nullptr);
    std::vector<double> out(y.rows());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = y(i, 0);
    return out;
}

// ---- Backward ---------------------------------------------------------------

LstmStepBack lstm_backward_step(const LstmCellParams& p, const LstmStepCache& cache,
                                const Matrix& dh, const Matrix& dc_in, LstmGrad& grads) {
    const std::size_t hidden = p.hidden_size();
    const std::size_t input = p.input_size();
    const std::size_t m = cache.hx.cols();
    if (dh.rows() != hidden || dh.cols() != m) throw ShapeError("lstm_backward_step: dh shape");

    // Pre-activation gradients for the four gates.
    Matrix dzi(hidden, m), dzf(hidden, m), dzo(hidden, m), dzg(hidden, m), dc_prev(hidden, m);
    for (std::size_t r = 0; r < hidden; ++r) {
        const double* pi = cache.gate_i.row(r);
        const double* pf = cache.gate_f.row(r);
        const double* po = cache.gate_o.row(r);
        const double* pg = cache.cand.row(r);
        const double* ptc = cache.tanh_c.row(r);
        const double* pcp = cache.c_prev.row(r);
        const double* pdh = dh.row(r);
        const double* pdc_in = dc_in.size() ? dc_in.row(r) : nullptr;
        for (std::size_t j = 0; j < m; ++j) {
            const double d_o = pdh[j] * ptc[j];
            double d_c = pdh[j] * po[j] * (1.0 - ptc[j] * ptc[j]);
            if (pdc_in) d_c += pdc_in[j];
            const double d_i = d_c * pg[j];
            const double d_f = d_c * pcp[j];
            const double d_g = d_c * pi[j];
            dzi(r, j) = d_i * pi[j] * (1.0 - pi[j]);
            dzf(r, j) = d_f * pf[j] * (1.0 - pf[j]);
            dzo(r, j) = d_o * po[j] * (1.0 - po[j]);
            dzg(r, j) = d_g * (1.0 - pg[j] * pg[j]);
            dc_prev(r, j) = d_c * pf[j];
        }
    }

    add_inplace(grads.w_input, kernels::matmul_nt(dzi, cache.hx));
    add_inplace(grads.w_forget, kernels::matmul_nt(dzf, cache.hx));
    add_inplace(grads.w_output, kernels::matmul_nt(dzo, cache.hx));
    add_inplace(grads.w_candidate, kernels::matmul_nt(dzg, cache.hx));
    for (std::size_t r = 0; r < hidden; ++r) {
        double si = 0, sf = 0, so = 0, sg = 0;
        for (std::size_t j = 0; j < m; ++j) {
            si += dzi(r, j);
            sf += dzf(r, j);
            so += dzo(r, j);
            sg += dzg(r, j);
        }
        grads.b_input[r] += si;
        grads.b_forget[r] += sf;
        grads.b_output[r] += so;
        grads.b_candidate[r] += sg;
    }

    Matrix dhx = kernels::matmul_tn(p.w_input, dzi);
    add_inplace(dhx, kernels::matmul_tn(p.w_forget, dzf));
    add_inplace(dhx, kernels::matmul_tn(p.w_output, dzo));
    add_inplace(dhx, kernels::matmul_tn(p.w_candidate, dzg));

    LstmStepBack back;
    back.dh_prev = Matrix(hidden, m);
    back.dx = Matrix(input, m);
    for (std::size_t r = 0; r < hidden; ++r)
        std::memcpy(back.dh_prev.row(r), dhx.row(r), m * sizeof(double));
    for (std::size_t r = 0; r < input; ++r)
        std::memcpy(back.dx.row(r), dhx.row(hidden + r), m * sizeof(double));
    back.dc_prev = std::move(dc_prev);
    return back;
}

Matrix dense_backward(const DenseParams& p, const DenseCache& cache, const Matrix& d_out,
                      DenseGrad& grads) {
    if (d_out.rows() != p.out_size() || d_out.cols() != cache.input.cols()) {
        throw ShapeError("dense_backward: gradient shape mismatch");
    }
    Matrix dz(d_out.rows(), d_out.cols());
    for (std::size_t r = 0; r < dz.rows(); ++r) {
        for (std::size_t j = 0; j < dz.cols(); ++j) {
            dz(r, j) = d_out(r, j) * activation_derivative_from_output(p.activation, cache.output(r, j));
        }
    }
    add_inplace(grads.weight, kernels::matmul_nt(dz, cache.input));
    for (std::size_t r = 0; r < dz.rows(); ++r) {
        double s = 0;
        for (std::size_t j = 0; j < dz.cols(); ++j) s += dz(r, j);
        grads.bias[r] += s;
    }
    return kernels::matmul_tn(p.weight, dz);
}

std::vector<Matrix> LstmSequenceRun::forward(std::span<const Matrix> xs, const Matrix& h0,
                                             const Matrix& c0) {
    if (xs.empty()) throw std::invalid_argument("LstmSequenceRun: empty input sequence");
    steps_.clear();
    steps_.resize(xs.size());
    batch_ = xs.front().cols();
    Matrix h = h0, c = c0;
    std::vector<Matrix> hs;
    hs.reserve(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        lstm_step_batch(*params_, xs[t], h, c, &steps_[t]);
        hs.push_back(h);
    }
    return hs;
}

LstmGrad LstmSequenceRun::backward(std::span<const Matrix> dh_per_step,
                                   std::vector<Matrix>* dx_per_step) const {
    if (steps_.empty()) throw std::logic_error("LstmSequenceRun: backward without a recorded forward");
    if (dh_per_step.size() != steps_.size()) {
        throw ShapeError("LstmSequenceRun: gradient count != step count");
    }
    const std::size_t hidden = params_->hidden_size();
    LstmGrad grads = zero_grad(*params_);
    if (dx_per_step) dx_per_step->assign(steps_.size(), Matrix());
    Matrix dh_carry(hidden, batch_);
    Matrix dc_carry(hidden, batch_);
    for (std::size_t ti = steps_.size(); ti-- > 0;) {
        Matrix dh = dh_carry;
        if (dh_per_step[ti].size()) add_inplace(dh, dh_per_step[ti]);
        LstmStepBack back = lstm_backward_step(*params_, steps_[ti], dh, dc_carry, grads);
        dh_carry = std::move(back.dh_prev);
        dc_carry = std::move(back.dc_prev);
        if (dx_per_step) (*dx_per_step)[ti] = std::move(back.dx);
    }
    return grads;
}

// ---- Updates ----------------------------------------------------------------

namespace {

void check_lr(double lr) {
    if (lr < 0.0 || !std::isfinite(lr)) throw std::invalid_argument("sgd_update: negative learning rate");
}

void update(Matrix& p, const Matrix& g, double lr) {
    if (!p.same_shape(g)) throw ShapeError("sgd_update: gradient shape mismatch");
    axpy_inplace(-lr, g, p);
}

void update(std::vector<double>& p, const std::vector<double>& g, double lr) {
    if (p.size() != g.size()) throw ShapeError("sgd_update: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

} // namespace

void sgd_update(DenseParams& p, const DenseGrad& g, double lr) {
    check_lr(lr);
    update(p.weight, g.weight, lr);
    update(p.bias, g.bias, lr);
}

void sgd_update(LstmCellParams& p, const LstmGrad& g, double lr) {
    check_lr(lr);
    update(p.w_input, g.w_input, lr);
    update(p.w_forget, g.w_forget, lr);
    update(p.w_output, g.w_output, lr);
    update(p.w_candidate, g.w_candidate, lr);
    update(p.b_input, g.b_input, lr);
    update(p.b_forget, g.b_forget, lr);
    update(p.b_output, g.b_output, lr);
    update(p.b_candidate, g.b_candidate, lr);
}

double lr_schedule(std::size_t epoch) { return 0.1 * std::pow(0.995, static_cast<double>(epoch)); }

// ---- Parameter flattening and checkpoints ------------------------------------

std::vector<ParamRef> param_refs(DenseParams& p, const std::string& prefix) {
    return {
        {prefix + ".weight", std::span<double>(p.weight.data(), p.weight.size())},
        {prefix + ".bias", std::span<double>(p.bias)},
    };
}

std::vector<ParamRef> param_refs(LstmCellParams& p, const std::string& prefix) {
    return {
        {prefix + ".w_input", std::span<double>(p.w_input.data(), p.w_input.size())},
        {prefix + ".w_forget", std::span<double>(p.w_forget.data(), p.w_forget.size())},
        {prefix + ".w_output", std::span<double>(p.w_output.data(), p.w_output.size())},
        {prefix + ".w_candidate", std::span<double>(p.w_candidate.data(), p.w_candidate.size())},
        {prefix + ".b_input", std::span<double>(p.b_input)},
        {prefix + ".b_forget", std::span<double>(p.b_forget)},
        {prefix + ".b_output", std::span<double>(p.b_output)},
        {prefix + ".b_candidate", std::span<double>(p.b_candidate)},
    };
}

std::vector<ParamRef> param_refs(DenseGrad& g, const std::string& prefix) {
    return {
        {prefix + ".weight", std::span<double>(g.weight.data(), g.weight.size())},
        {prefix + ".bias", std::span<double>(g.bias)},
    };
}

std::vector<ParamRef> param_refs(LstmGrad& g, const std::string& prefix) {
    return {
        {prefix + ".w_input", std::span<double>(g.w_input.data(), g.w_input.size())},
        {prefix + ".w_forget", std::span<double>(g.w_forget.data(), g.w_forget.size())},
        {prefix + ".w_output", std::span<double>(g.w_output.data(), g.w_output.size())},
        {prefix + ".w_candidate", std::span<double>(g.w_candidate.data(), g.w_candidate.size())},
        {prefix + ".b_input", std::span<double>(g.b_input)},
        {prefix + ".b_forget", std::span<double>(g.b_forget)},
        {prefix + ".b_output", std::span<double>(g.b_output)},
        {prefix + ".b_candidate", std::span<double>(g.b_candidate)},
    };
}

namespace {

constexpr char kMagic[4] = {'L', 'Y', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

NamedTensor matrix_tensor(const std::string& name, const Matrix& m) {
    NamedTensor t;
    t.name = name;
    t.rows = m.rows();
    t.cols = m.cols();
    t.values.assign(m.data(), m.data() + m.size());
    return t;
}

NamedTensor vector_tensor(const std::string& name, const std::vector<double>& v) {
    NamedTensor t;
    t.name = name;
    t.rows = v.size();
    t.cols = 1;
    t.values = v;
    return t;
}

} // namespace

void save_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp.string() + " for writing");
        os.write(kMagic, 4);
        write_pod(os, kVersion);
        write_pod(os, static_cast<std::uint64_t>(tensors.size()));
        for (const auto& t : tensors) {
            write_pod(os, static_cast<std::uint64_t>(t.name.size()));
            os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
            write_pod(os, t.rows);
            write_pod(os, t.cols);
            os.write(reinterpret_cast<const char*>(t.values.data()),
                     static_cast<std::streamsize>(t.values.size() * sizeof(double)));
        }
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto count = read_pod<std::uint64_t>(is);
    std::vector<NamedTensor> tensors(count);
    for (auto& t : tensors) {
        const auto name_len = read_pod<std::uint64_t>(is);
        t.name.resize(name_len);
        is.read(t.name.data(), static_cast<std::streamsize>(name_len));
        t.rows = read_pod<std::uint64_t>(is);
        t.cols = read_pod<std::uint64_t>(is);
        t.values.resize(t.rows * t.cols);
        is.read(reinterpret_cast<char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor " + t.name);
    }
    return tensors;
}

std::vector<NamedTensor> to_tensors(const DenseParams& p, const std::string& prefix) {
    return {matrix_tensor(prefix + ".weight", p.weight), vector_tensor(prefix + ".bias", p.bias)};
}

std::vector<NamedTensor> to_tensors(const LstmCellParams& p, const std::string& prefix) {
    return {
        matrix_tensor(prefix + ".w_input", p.w_input),
        matrix_tensor(prefix + ".w_forget", p.w_forget),
        matrix_tensor(prefix + ".w_output", p.w_output),
        matrix_tensor(prefix + ".w_candidate", p.w_candidate),
        vector_tensor(prefix + ".b_input", p.b_input),
        vector_tensor(prefix + ".b_forget", p.b_forget),
        vector_tensor(prefix + ".b_output", p.b_output),
        vector_tensor(prefix + ".b_candidate", p.b_candidate),
    };
}

const NamedTensor& find_tensor(std::span<const NamedTensor> tensors, const std::string& name) {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::runtime_error("checkpoint: missing tensor " + name);
}

Matrix tensor_matrix(const NamedTensor& t) {
    Matrix m(t.rows, t.cols);
    std::memcpy(m.data(), t.values.data(), t.values.size() * sizeof(double));
    return m;
}

std::vector<double> tensor_vector(const NamedTensor& t) {
    if (t.cols != 1) throw std::runtime_error("checkpoint: tensor " + t.name + " is not a vector");
    return t.values;
}

} // namespace lyromel
