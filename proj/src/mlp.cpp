#include "gorl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace gorl {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::SiLU: return "silu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
    }
    throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& name) {
    if (name == "silu") return Activation::SiLU;
    if (name == "tanh") return Activation::Tanh;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + name);
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

namespace {

double act_apply(Activation a, double x) {
    switch (a) {
        case Activation::SiLU: return silu(x);
        case Activation::Tanh: return std::tanh(x);
        case Activation::Identity: return x;
    }
    return x;
}

double act_grad(Activation a, double x) {
    switch (a) {
        case Activation::SiLU: return silu_grad(x);
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

}  // namespace

Mlp make_mlp(const std::vector<int>& dims, Activation hidden, Activation output) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least two dims");
    for (int d : dims)
        if (d <= 0) throw std::invalid_argument("make_mlp: dims must be positive");
    Mlp net;
    net.layer_dims = dims;
    const int layers = static_cast<int>(dims.size()) - 1;
    for (int k = 0; k < layers; ++k) {
        net.weights.emplace_back(dims[k], dims[k + 1]);
        net.biases.emplace_back(1, dims[k + 1]);
        net.activations.push_back(k + 1 == layers ? output : hidden);
    }
    return net;
}

void init_mlp(Mlp& net, RngStream& stream) {
    for (int k = 0; k < net.num_layers(); ++k) {
        Matrix& w = net.weights[k];
        const double bound = std::sqrt(6.0 / (w.rows() + w.cols()));
        for (size_t i = 0; i < w.size(); ++i)
            w.data()[i] = (2.0 * stream.next_uniform() - 1.0) * bound;
        net.biases[k].fill(0.0);
    }
}

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpTape* tape) {
    if (input.cols() != net.input_dim())
        throw std::invalid_argument("mlp_forward: input cols != first layer dim");
    if (tape) {
        tape->layer_inputs.clear();
        tape->pre_activations.clear();
        tape->layer_dims = net.layer_dims;
    }
    Matrix x = input;
    for (int k = 0; k < net.num_layers(); ++k) {
        if (tape) tape->layer_inputs.push_back(x);
        Matrix z = matmul(x, net.weights[k]);
        add_row_inplace(z, net.biases[k]);
        if (tape) tape->pre_activations.push_back(z);
        const Activation act = net.activations[k];
        if (act != Activation::Identity)
            for (size_t i = 0; i < z.size(); ++i) z.data()[i] = act_apply(act, z.data()[i]);
        x = std::move(z);
    }
    return x;
}

MlpGrads mlp_backward(const Mlp& net, const MlpTape& tape, const Matrix& output_grad) {
    if (tape.layer_dims != net.layer_dims ||
        static_cast<int>(tape.pre_activations.size()) != net.num_layers())
        throw std::invalid_argument("mlp_backward: tape does not match net");
    if (output_grad.cols() != net.output_dim() ||
        output_grad.rows() != tape.layer_inputs.front().rows())
        throw std::invalid_argument("mlp_backward: output_grad shape mismatch");

    MlpGrads grads;
    grads.weights.resize(net.num_layers());
    grads.biases.resize(net.num_layers());

    Matrix delta = output_grad;
    for (int k = net.num_layers() - 1; k >= 0; --k) {
        const Matrix& z = tape.pre_activations[k];
        const Activation act = net.activations[k];
        if (act != Activation::Identity)
            for (size_t i = 0; i < delta.size(); ++i)
                delta.data()[i] *= act_grad(act, z.data()[i]);
        grads.weights[k] = matmul(transpose(tape.layer_inputs[k]), delta);
        grads.biases[k] = col_sums(delta);
        if (k > 0) delta = matmul(delta, transpose(net.weights[k]));
    }
    grads.input = matmul(delta, transpose(net.weights[0]));
    return grads;
}

void accumulate_grads(MlpGrads& into, const MlpGrads& from) {
    for (size_t k = 0; k < into.weights.size(); ++k) {
        add_inplace(into.weights[k], from.weights[k]);
        add_inplace(into.biases[k], from.biases[k]);
    }
}

void scale_grads(MlpGrads& g, double s) {
    for (auto& w : g.weights) w = scale(w, s);
    for (auto& b : g.biases) b = scale(b, s);
}

MlpGrads zero_grads_like(const Mlp& net, int batch_rows) {
    MlpGrads g;
    for (int k = 0; k < net.num_layers(); ++k) {
        g.weights.emplace_back(net.weights[k].rows(), net.weights[k].cols());
        g.biases.emplace_back(1, net.biases[k].cols());
    }
    g.input = Matrix(batch_rows, net.input_dim());
    return g;
}

std::vector<Matrix*> mlp_params(Mlp& net) {
    std::vector<Matrix*> p;
    for (auto& w : net.weights) p.push_back(&w);
    for (auto& b : net.biases) p.push_back(&b);
    return p;
}

std::vector<const Matrix*> mlp_param_view(const Mlp& net) {
    std::vector<const Matrix*> p;
    for (auto& w : net.weights) p.push_back(&w);
    for (auto& b : net.biases) p.push_back(&b);
    return p;
}

std::vector<const Matrix*> grad_view(const MlpGrads& g) {
    std::vector<const Matrix*> p;
    for (auto& w : g.weights) p.push_back(&w);
    for (auto& b : g.biases) p.push_back(&b);
    return p;
}

uint64_t param_hash(const std::vector<const Matrix*>& params) {
    uint64_t h = 0xCBF29CE484222325ull;
    auto feed = [&h](const void* ptr, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(ptr);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001B3ull;
        }
    };
    for (const Matrix* m : params) {
        const int shape[2] = {m->rows(), m->cols()};
        feed(shape, sizeof(shape));
        feed(m->data(), m->size() * sizeof(double));
    }
    return h;
}

}  // namespace gorl
