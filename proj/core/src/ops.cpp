#include "fond/ops.hpp"

#include "fond/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fond {

void require_finite(const Tensor2& t, const char* where) {
    if (!t.all_finite()) {
        throw NumericalError(std::string("non-finite value produced by ") + where);
    }
}

Tensor2 affine_forward(const Tensor2& x, const Tensor2& weights, std::span<const double> bias) {
    if (x.cols() != weights.rows() || bias.size() != weights.cols()) {
        throw DimensionError("affine_forward: input " + x.shape_string() + " weights " +
                             weights.shape_string() + " bias [" + std::to_string(bias.size()) + "]");
    }
    const std::size_t n = x.rows(), k = x.cols(), m = weights.cols();
    Tensor2 out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        auto out_row = out.row(i);
        std::copy(bias.begin(), bias.end(), out_row.begin());
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x(i, p);
            const auto w_row = weights.row(p);
            for (std::size_t j = 0; j < m; ++j) out_row[j] += xv * w_row[j];
        }
    }
    require_finite(out, "affine_forward");
    return out;
}

AffineGrads affine_backward(const Tensor2& upstream, const Tensor2& input, const Tensor2& weights) {
    if (upstream.rows() != input.rows() || upstream.cols() != weights.cols() ||
        input.cols() != weights.rows()) {
        throw DimensionError("affine_backward: upstream " + upstream.shape_string() + " input " +
                             input.shape_string() + " weights " + weights.shape_string());
    }
    const std::size_t n = input.rows(), k = input.cols(), m = weights.cols();
    AffineGrads g{Tensor2(n, k), Tensor2(k, m), std::vector<double>(m, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const auto up = upstream.row(i);
        for (std::size_t j = 0; j < m; ++j) g.bias[j] += up[j];
        auto dx = g.input.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const auto w_row = weights.row(p);
            auto dw_row = g.weights.row(p);
            const double xv = input(i, p);
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                acc += up[j] * w_row[j];
                dw_row[j] += xv * up[j];
            }
            dx[p] = acc;
        }
    }
    return g;
}

Tensor2 relu_forward(const Tensor2& x) {
    Tensor2 out = x;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor2 relu_backward(const Tensor2& upstream, const Tensor2& input) {
    if (!upstream.same_shape(input)) {
        throw DimensionError("relu_backward: upstream " + upstream.shape_string() + " input " +
                             input.shape_string());
    }
    Tensor2 out = upstream;
    auto o = out.values();
    const auto in = input.values();
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (!(in[i] > 0.0)) o[i] = 0.0;
    }
    return out;
}

Tensor2 softmax_forward(const Tensor2& logits) {
    Tensor2 out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto in = logits.row(i);
        auto row = out.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            row[j] = std::exp(in[j] - mx);
            sum += row[j];
        }
        for (double& v : row) v /= sum;
    }
    require_finite(out, "softmax_forward");
    return out;
}

Tensor2 log_softmax_forward(const Tensor2& logits) {
    Tensor2 out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const auto in = logits.row(i);
        auto row = out.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (double v : in) sum += std::exp(v - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < in.size(); ++j) row[j] = in[j] - lse;
    }
    require_finite(out, "log_softmax_forward");
    return out;
}

Tensor2 softmax_backward(const Tensor2& upstream, const Tensor2& probabilities) {
    if (!upstream.same_shape(probabilities)) {
        throw DimensionError("softmax_backward: upstream " + upstream.shape_string() +
                             " probabilities " + probabilities.shape_string());
    }
    Tensor2 out(upstream.rows(), upstream.cols());
    for (std::size_t i = 0; i < upstream.rows(); ++i) {
        const auto g = upstream.row(i);
        const auto p = probabilities.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) dot += g[j] * p[j];
        auto o = out.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) o[j] = p[j] * (g[j] - dot);
    }
    return out;
}

NormalizedRows l2_normalize_rows(const Tensor2& z) {
    NormalizedRows r{Tensor2(z.rows(), z.cols()), std::vector<double>(z.rows())};
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto in = z.row(i);
        double sq = 0.0;
        for (double v : in) sq += v * v;
        const double norm = std::sqrt(sq);
        if (!(norm > kNormEpsilon)) {
            throw DegenerateInputError("l2_normalize_rows: row " + std::to_string(i) +
                                       " has norm " + std::to_string(norm));
        }
        r.norms[i] = norm;
        auto out = r.output.row(i);
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] / norm;
    }
    require_finite(r.output, "l2_normalize_rows");
    return r;
}

// d(z/|z|) = (g - y (y.g)) / |z|
Tensor2 l2_normalize_backward(const Tensor2& upstream, const NormalizedRows& forward) {
    if (!upstream.same_shape(forward.output)) {
        throw DimensionError("l2_normalize_backward: upstream " + upstream.shape_string() +
                             " output " + forward.output.shape_string());
    }
    Tensor2 out(upstream.rows(), upstream.cols());
    for (std::size_t i = 0; i < upstream.rows(); ++i) {
        const auto g = upstream.row(i);
        const auto y = forward.output.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) dot += y[j] * g[j];
        auto o = out.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) o[j] = (g[j] - y[j] * dot) / forward.norms[i];
    }
    return out;
}

Tensor2 make_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    Tensor2 mask(rows, cols, 1.0);
    if (rate == 0.0) return mask;
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep_scale;
    return mask;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("hadamard: " + a.shape_string() + " vs " + b.shape_string());
    }
    Tensor2 out = a;
    auto o = out.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
    return out;
}

}  // namespace fond
