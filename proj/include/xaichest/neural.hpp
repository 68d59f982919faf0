#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xaichest/phy.hpp"

namespace xaichest {

enum class OutputActivation { Identity, Sigmoid };

// Dense ReLU network. Weights are row-major [out x in] per layer.
struct Mlp {
    std::vector<int> dims;  // input, hidden..., output
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    OutputActivation output_activation = OutputActivation::Identity;

    int num_layers() const { return static_cast<int>(dims.size()) - 1; }
    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
};

// He-uniform init for the ReLU layers, Glorot-uniform for the output layer,
// zero biases. Fully determined by (dims, activation, seed).
Mlp make_mlp(const std::vector<int>& dims, OutputActivation output_activation,
             std::uint64_t seed);

struct ForwardCache {
    std::vector<std::vector<double>> inputs;   // per-layer input vectors
    std::vector<std::vector<double>> preacts;  // per-layer pre-activations
};

std::vector<double> forward(const Mlp& model, const std::vector<double>& x,
                            ForwardCache* cache = nullptr);

struct Gradients {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
};

Gradients zero_gradients(const Mlp& model);
void scale_gradients(Gradients& g, double factor);

// Reverse pass for one sample. Accumulates parameter gradients into *grads
// (may be null when only the input gradient is needed) and returns the
// gradient with respect to the model input.
std::vector<double> backward(const Mlp& model, const ForwardCache& cache,
                             const std::vector<double>& grad_output, Gradients* grads);

struct MseResult {
    double loss;
    std::vector<double> grad;  // d loss / d pred
};

// Mean squared error over coordinates.
MseResult mse_loss(const std::vector<double>& pred, const std::vector<double>& target);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 128;
    int epochs = 500;
    std::uint64_t seed = 1;
    double lambda = 0.005;  // interpretability weight; N-model training only
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct AdamState {
    Gradients m;
    Gradients v;
    long long step = 0;
};

AdamState make_adam_state(const Mlp& model);
void adam_step(Mlp& model, AdamState& state, const Gradients& grads, const TrainConfig& cfg);

// Real/imag stacking: first m entries real parts, last m imaginary parts.
std::vector<double> stack_complex(const CVec& v);
CVec unstack_complex(const std::vector<double>& v);

// Row-major sample matrix in float32 (the on-disk precision), plus the
// generation manifest.
struct Dataset {
    int d_in = 0;
    int d_out = 0;
    std::vector<float> inputs;
    std::vector<float> targets;
    std::string meta;

    std::size_t rows() const {
        return d_in == 0 ? 0 : inputs.size() / static_cast<std::size_t>(d_in);
    }
    std::vector<double> input_row(std::size_t r) const;
    std::vector<double> target_row(std::size_t r) const;
};

struct TrainResult {
    Mlp model;
    std::vector<double> history;  // mean per-sample loss per epoch
};

// Mini-batch ADAM on MSE with seeded per-epoch shuffling.
TrainResult train_u(const Dataset& data, const std::vector<int>& hidden,
                    const TrainConfig& cfg);

double dataset_mse(const Mlp& model, const Dataset& data, std::size_t max_rows = 0);

// Text model file; values are hex floats so the round trip is bit exact.
void save_model(const Mlp& model, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

}  // namespace xaichest
