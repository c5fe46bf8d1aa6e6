#pragma once

// Differentiable building blocks. Every forward op has an explicit backward
// taking whatever the forward needs to keep; there is no graph.

#include "fond/random.hpp"
#include "fond/tensor.hpp"

#include <span>
#include <vector>

namespace fond {

inline constexpr double kNormEpsilon = 1e-12;

// out = x * W + bias (bias broadcast over rows).
Tensor2 affine_forward(const Tensor2& x, const Tensor2& weights, std::span<const double> bias);

struct AffineGrads {
    Tensor2 input;
    Tensor2 weights;
    std::vector<double> bias;
};

// Gradients of the affine map given the forward input and weights.
AffineGrads affine_backward(const Tensor2& upstream, const Tensor2& input, const Tensor2& weights);

Tensor2 relu_forward(const Tensor2& x);
Tensor2 relu_backward(const Tensor2& upstream, const Tensor2& input);

// Row-wise softmax, max-shifted for stability.
Tensor2 softmax_forward(const Tensor2& logits);
Tensor2 log_softmax_forward(const Tensor2& logits);
// Vector-Jacobian product of softmax given its output.
Tensor2 softmax_backward(const Tensor2& upstream, const Tensor2& probabilities);

struct NormalizedRows {
    Tensor2 output;
    std::vector<double> norms;  // pre-normalization Euclidean norm of each row
};

// Throws DegenerateInputError for any row with norm <= kNormEpsilon.
NormalizedRows l2_normalize_rows(const Tensor2& z);
Tensor2 l2_normalize_backward(const Tensor2& upstream, const NormalizedRows& forward);

// Inverted dropout: kept entries are scaled by 1/(1-rate).
Tensor2 make_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);

// Throws NumericalError naming `where` if any entry is NaN or infinite.
void require_finite(const Tensor2& t, const char* where);

}  // namespace fond
