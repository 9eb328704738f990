#pragma once

#include <string>
#include <vector>

#include "gorl/matrix.hpp"
#include "gorl/rng.hpp"

namespace gorl {

enum class Activation { SiLU, Tanh, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected net with one activation per layer. Weights are
// [in x out], biases [1 x out]; layer k maps layer_dims[k] -> layer_dims[k+1].
struct Mlp {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
    std::vector<Activation> activations;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    int num_layers() const { return static_cast<int>(weights.size()); }
};

// Activation record from a forward pass: per-layer inputs and
// pre-activations, enough to compute exact gradients.
struct MlpTape {
    std::vector<Matrix> layer_inputs;     // input to each layer
    std::vector<Matrix> pre_activations;  // x*W + b per layer
    std::vector<int> layer_dims;          // copied for tape/net validation
};

struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
    Matrix input;
};

// Hidden layers use `hidden`, a final Identity output layer unless overridden.
Mlp make_mlp(const std::vector<int>& dims, Activation hidden, Activation output = Activation::Identity);

// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
void init_mlp(Mlp& net, RngStream& stream);

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpTape* tape = nullptr);

// Gradients of a scalar loss given d(loss)/d(output); exact for the
// computation recorded on the tape.
MlpGrads mlp_backward(const Mlp& net, const MlpTape& tape, const Matrix& output_grad);

void accumulate_grads(MlpGrads& into, const MlpGrads& from);
void scale_grads(MlpGrads& g, double s);
MlpGrads zero_grads_like(const Mlp& net, int batch_rows = 0);

std::vector<Matrix*> mlp_params(Mlp& net);
std::vector<const Matrix*> mlp_param_view(const Mlp& net);
std::vector<const Matrix*> grad_view(const MlpGrads& g);

// FNV-1a over the raw parameter bytes; used by freeze-discipline checks.
uint64_t param_hash(const std::vector<const Matrix*>& params);

double silu(double x);
double silu_grad(double x);

}  // namespace gorl
