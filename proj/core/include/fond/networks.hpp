#pragma once

// Feature extractor F: x -> h, projection head P: h -> z (unit rows), and
// classifier G: h -> logits. The model composes as G(F(x)); the contrastive
// branch runs P(F(x)). Neither branch consumes the other's output.

#include "fond/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fond {

struct NetworkConfig {
    std::size_t input_dim = 0;
    std::size_t feature_dim = 64;
    std::size_t projection_dim = 32;
    std::size_t num_classes = 0;
    std::vector<std::size_t> feature_hidden{64, 64};
    std::vector<std::size_t> projection_hidden{64};
    // Identity networks: F requires feature_dim == input_dim, P requires
    // projection_dim == feature_dim. Hidden widths are ignored.
    bool feature_identity = false;
    bool projection_identity = false;

    void validate() const;
    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct DenseLayer {
    Tensor2 weights;  // fan_in x fan_out
    std::vector<double> bias;
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Stack of affine layers with ReLU between consecutive layers and a linear
// output. An empty stack is the identity map.
class Mlp {
public:
    struct Trace {
        std::vector<Tensor2> inputs;           // input to each layer (post-activation)
        std::vector<Tensor2> pre_activations;  // affine output of each hidden layer
    };

    std::vector<DenseLayer> layers;

    Tensor2 forward(const Tensor2& x) const;
    Tensor2 forward(const Tensor2& x, Trace& trace) const;
    // Accumulates parameter gradients into `grads` (same topology) and returns
    // the gradient with respect to the input.
    Tensor2 backward(const Tensor2& upstream, const Trace& trace, Mlp& grads) const;

    std::size_t input_dim() const;
    std::size_t output_dim() const;

    friend bool operator==(const Mlp&, const Mlp&) = default;
};

struct ModelParams {
    NetworkConfig config;
    std::uint64_t seed = 0;
    Mlp feature;
    Mlp projection;
    Mlp classifier;

    // Every parameter buffer in a fixed order: feature, projection, classifier;
    // per layer weights then bias.
    std::vector<std::span<double>> buffers();
    std::vector<std::span<const double>> buffers() const;
    std::size_t parameter_count() const;

    // Same topology, all zeros. Used as a gradient accumulator.
    ModelParams zeros_like() const;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
ModelParams init_params(const NetworkConfig& config, std::uint64_t seed);

Tensor2 forward_features(const ModelParams& params, const Tensor2& x);
// Rows are unit norm; throws DegenerateInputError for a zero pre-normalization row.
Tensor2 forward_projection(const ModelParams& params, const Tensor2& h);

struct ClassifierOutput {
    Tensor2 logits;
    Tensor2 probabilities;
};
ClassifierOutput forward_classifier(const ModelParams& params, const Tensor2& h);

// Text checkpoint. Tensors are written as hexadecimal floats so that a
// save/load round trip is bit-exact. `provenance` is stored verbatim on one line.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const std::string& provenance = "{}");
ModelParams load_checkpoint(const std::filesystem::path& path, std::string* provenance = nullptr);

std::string network_config_to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const std::string& text);

}  // namespace fond
