#pragma once

// Training objectives: cross-entropy task loss, the domain-aware supervised
// contrastive loss with inter-domain positive weight `a` and intra-domain
// negative weight `b`, the group-fairness gap between domain-linked and
// domain-shared classes, and their weighted sum.

#include "fond/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fond {

// Where the positive-pair weight enters the contrastive term.
//  numerator_scale:  a * exp(s)        (constant factor; gradient-inert)
//  similarity_scale: exp(a * s)
enum class AlphaMode { numerator_scale, similarity_scale };

enum class Variant {
    fond,      // a, b, lambda_fair as configured
    fond_f,    // no fairness term
    fond_fb,   // no fairness, b = 1
    fond_fba,  // no fairness, a = b = 1
    erm,       // task loss only
    supcon,    // task loss + unweighted supervised contrastive term
};

std::string to_string(Variant v);
std::string to_string(AlphaMode m);
Variant parse_variant(std::string_view text);
AlphaMode parse_alpha_mode(std::string_view text);

struct LossConfig {
    double temperature = 0.1;
    double a = 2.0;
    double b = 2.0;
    double lambda_xdom = 1.0;
    double lambda_fair = 1.0;
    AlphaMode alpha_mode = AlphaMode::numerator_scale;
    Variant variant = Variant::fond;

    // Copy with the variant's forced values applied.
    LossConfig resolved() const;
    void validate() const;

    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct BatchAnnotations {
    std::vector<int> labels;
    std::vector<int> domains;
    std::vector<std::uint8_t> linked;  // 1 iff the label is a domain-linked class

    std::size_t size() const noexcept { return labels.size(); }
    void validate() const;
};

struct LossWithGrad {
    double value = 0.0;
    Tensor2 grad;
};

// Mean cross-entropy. `grad` is with respect to the logits that produced the
// probabilities: (p - onehot) / N.
LossWithGrad task_loss(const Tensor2& probabilities, std::span<const int> labels);

// Domain-aware supervised contrastive loss, summed over anchors that have at
// least one positive. Rows of `z` must be unit norm; `grad` is with respect to z.
LossWithGrad xdom_loss(const Tensor2& z, const BatchAnnotations& ann, const LossConfig& cfg);

struct FairLossResult {
    double value = 0.0;
    Tensor2 grad;  // with respect to logits
    double linked_task = 0.0;
    double shared_task = 0.0;
    std::size_t linked_count = 0;
    std::size_t shared_count = 0;
    bool empty_group = false;  // one group absent: loss and gradient are zero
};

// |CE(linked samples) - CE(shared samples)|, each a per-sample mean within its group.
FairLossResult fair_loss(const Tensor2& probabilities, std::span<const int> labels,
                         std::span<const std::uint8_t> linked_mask);

struct FondLossResult {
    double total = 0.0;
    double task = 0.0;
    double xdom = 0.0;
    double fair = 0.0;
    double linked_task = 0.0;
    double shared_task = 0.0;
    bool fair_empty_group = false;
    bool xdom_evaluated = false;
    Tensor2 grad_logits;
    Tensor2 grad_z;
};

// total = task + lambda_xdom * xdom + lambda_fair * fair.
// The contrastive term is evaluated only when lambda_xdom > 0 and the batch has
// at least two samples; otherwise `z` may be empty and grad_z is zero.
FondLossResult fond_loss(const Tensor2& logits, const Tensor2& z, const BatchAnnotations& ann,
                         const LossConfig& cfg);

namespace detail {
// xdom_loss without the unit-row precondition, for gradient checks in ambient space.
LossWithGrad xdom_loss_unchecked(const Tensor2& z, const BatchAnnotations& ann,
                                 const LossConfig& cfg);
}  // namespace detail

}  // namespace fond
