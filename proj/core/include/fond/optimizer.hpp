#pragma once

// First-order updates over a model's parameter buffers. With learning rate
// eta, gradient g and step count t (1-based):
//
//   sgd:           theta <- theta - eta * g
//   sgd_momentum:  v <- mu * v + g;  theta <- theta - eta * v
//   adam:          m <- b1 * m + (1 - b1) * g
//                  v <- b2 * v + (1 - b2) * g^2
//                  theta <- theta - eta * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//
// The first adam step therefore moves each coordinate by -eta * g / (|g| + eps).

#include "fond/networks.hpp"

#include <string>
#include <vector>

namespace fond {

enum class OptimizerKind { sgd, sgd_momentum, adam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& text);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
    friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct OptimizerState {
    std::size_t step = 0;
    std::vector<std::vector<double>> first;   // momentum buffer or adam m
    std::vector<std::vector<double>> second;  // adam v
};

// Throws DimensionError if `grads` does not match `params` buffer for buffer.
void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const OptimizerConfig& cfg);

}  // namespace fond
