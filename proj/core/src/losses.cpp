#include "fond/losses.hpp"

#include "fond/errors.hpp"
#include "fond/ops.hpp"

#include <algorithm>
#include <cmath>

namespace fond {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::fond: return "FOND";
        case Variant::fond_f: return "FOND\\F";
        case Variant::fond_fb: return "FOND\\FB";
        case Variant::fond_fba: return "FOND\\FBA";
        case Variant::erm: return "ERM";
        case Variant::supcon: return "SUPCON";
    }
    return "?";
}

std::string to_string(AlphaMode m) {
    return m == AlphaMode::numerator_scale ? "numerator_scale" : "similarity_scale";
}

Variant parse_variant(std::string_view text) {
    std::string t(text);
    std::replace(t.begin(), t.end(), '\\', '_');
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
    if (t == "FOND") return Variant::fond;
    if (t == "FOND_F") return Variant::fond_f;
    if (t == "FOND_FB") return Variant::fond_fb;
    if (t == "FOND_FBA") return Variant::fond_fba;
    if (t == "ERM") return Variant::erm;
    if (t == "SUPCON") return Variant::supcon;
    throw ConfigError("unknown variant '" + std::string(text) + "'");
}

AlphaMode parse_alpha_mode(std::string_view text) {
    if (text == "numerator_scale") return AlphaMode::numerator_scale;
    if (text == "similarity_scale") return AlphaMode::similarity_scale;
    throw ConfigError("unknown alpha_mode '" + std::string(text) + "'");
}

LossConfig LossConfig::resolved() const {
    LossConfig c = *this;
    switch (variant) {
        case Variant::fond: break;
        case Variant::fond_f: c.lambda_fair = 0.0; break;
        case Variant::fond_fb: c.b = 1.0; c.lambda_fair = 0.0; break;
        case Variant::fond_fba:
        case Variant::supcon: c.a = 1.0; c.b = 1.0; c.lambda_fair = 0.0; break;
        case Variant::erm: c.lambda_xdom = 0.0; c.lambda_fair = 0.0; break;
    }
    return c;
}

void LossConfig::validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("temperature must be > 0");
    }
    if (!(a >= 1.0) || !(b >= 1.0)) throw ConfigError("contrastive weights a and b must be >= 1");
    if (!(lambda_xdom >= 0.0) || !(lambda_fair >= 0.0)) {
        throw ConfigError("loss weights lambda_xdom and lambda_fair must be >= 0");
    }
}

void BatchAnnotations::validate() const {
    if (domains.size() != labels.size() || linked.size() != labels.size()) {
        throw DimensionError("batch annotations: labels " + std::to_string(labels.size()) +
                             ", domains " + std::to_string(domains.size()) + ", linked " +
                             std::to_string(linked.size()));
    }
}

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
    if (labels.size() != rows) {
        throw DimensionError("labels length " + std::to_string(labels.size()) + " vs batch " +
                             std::to_string(rows));
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw ContractError("label " + std::to_string(y) + " outside [0, " +
                                std::to_string(classes) + ")");
        }
    }
}

void check_normalized(const Tensor2& probabilities) {
    for (std::size_t i = 0; i < probabilities.rows(); ++i) {
        double s = 0.0;
        for (double p : probabilities.row(i)) {
            if (!(p >= 0.0)) throw ContractError("negative or NaN probability in row " + std::to_string(i));
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9) {
            throw ContractError("probability row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }
}

Tensor2 log_of(const Tensor2& p) {
    Tensor2 out = p;
    for (double& v : out.values()) v = std::log(v);
    return out;
}

// Per-sample cross-entropy -log p_y, with non-finite guard.
double sample_ce(const Tensor2& log_probs, std::size_t i, int label) {
    const double v = -log_probs(i, static_cast<std::size_t>(label));
    if (!std::isfinite(v)) {
        throw NumericalError("cross-entropy is infinite for sample " + std::to_string(i));
    }
    return v;
}

LossWithGrad task_from(const Tensor2& probs, const Tensor2& log_probs, std::span<const int> labels) {
    const std::size_t n = probs.rows();
    LossWithGrad r{0.0, probs};
    if (n == 0) throw DimensionError("task_loss: empty batch");
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.value += sample_ce(log_probs, i, labels[i]);
        auto g = r.grad.row(i);
        g[static_cast<std::size_t>(labels[i])] -= 1.0;
        for (double& v : g) v *= inv_n;
    }
    r.value *= inv_n;
    return r;
}

FairLossResult fair_from(const Tensor2& probs, const Tensor2& log_probs, std::span<const int> labels,
                         std::span<const std::uint8_t> linked) {
    const std::size_t n = probs.rows();
    if (linked.size() != n) {
        throw DimensionError("linked mask length " + std::to_string(linked.size()) + " vs batch " +
                             std::to_string(n));
    }
    FairLossResult r;
    r.grad = Tensor2(n, probs.cols());
    for (std::size_t i = 0; i < n; ++i) {
        const double ce = sample_ce(log_probs, i, labels[i]);
        if (linked[i]) {
            r.linked_task += ce;
            ++r.linked_count;
        } else {
            r.shared_task += ce;
            ++r.shared_count;
        }
    }
    if (r.linked_count) r.linked_task /= static_cast<double>(r.linked_count);
    if (r.shared_count) r.shared_task /= static_cast<double>(r.shared_count);
    if (r.linked_count == 0 || r.shared_count == 0) {
        r.empty_group = true;
        return r;
    }
    const double diff = r.linked_task - r.shared_task;
    r.value = std::abs(diff);
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    if (sign == 0.0) return r;
    const double w_linked = sign / static_cast<double>(r.linked_count);
    const double w_shared = -sign / static_cast<double>(r.shared_count);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = linked[i] ? w_linked : w_shared;
        auto g = r.grad.row(i);
        const auto p = probs.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] = w * p[j];
        g[static_cast<std::size_t>(labels[i])] -= w;
    }
    return r;
}

}  // namespace

LossWithGrad task_loss(const Tensor2& probabilities, std::span<const int> labels) {
    check_labels(labels, probabilities.rows(), probabilities.cols());
    check_normalized(probabilities);
    return task_from(probabilities, log_of(probabilities), labels);
}

FairLossResult fair_loss(const Tensor2& probabilities, std::span<const int> labels,
                         std::span<const std::uint8_t> linked_mask) {
    check_labels(labels, probabilities.rows(), probabilities.cols());
    check_normalized(probabilities);
    return fair_from(probabilities, log_of(probabilities), labels, linked_mask);
}

namespace detail {

LossWithGrad xdom_loss_unchecked(const Tensor2& z, const BatchAnnotations& ann, const LossConfig& cfg_in) {
    const LossConfig cfg = cfg_in.resolved();
    cfg.validate();
    ann.validate();
    const std::size_t n = z.rows();
    if (ann.size() != n) {
        throw DimensionError("xdom_loss: annotations " + std::to_string(ann.size()) + " vs batch " +
                             std::to_string(n));
    }
    if (n < 2) throw ContractError("xdom_loss: batch too small (N=" + std::to_string(n) + ", need >= 2)");

    const double inv_tau = 1.0 / cfg.temperature;
    const double log_a = std::log(cfg.a);
    const bool similarity_mode = cfg.alpha_mode == AlphaMode::similarity_scale;

    // Scaled similarities s_ij = z_i . z_j / tau.
    Tensor2 sim(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const auto zi = z.row(i), zj = z.row(j);
            double dot = 0.0;
            for (std::size_t k = 0; k < zi.size(); ++k) dot += zi[k] * zj[k];
            sim(i, j) = sim(j, i) = dot * inv_tau;
        }
    }

    // coef(i, j) = dL/ds_ij accumulated from anchor i's term.
    Tensor2 coef(n, n);
    LossWithGrad r{0.0, Tensor2(n, z.cols())};
    std::vector<double> weighted(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t positives = 0;
        for (std::size_t p = 0; p < n; ++p) {
            if (p != i && ann.labels[p] == ann.labels[i]) ++positives;
        }
        if (positives == 0) continue;

        double mx = -INFINITY;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) mx = std::max(mx, sim(i, a));
        }
        double denom = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
            if (a == i) continue;
            const bool intra_negative = ann.domains[a] == ann.domains[i] && ann.labels[a] != ann.labels[i];
            weighted[a] = (intra_negative ? cfg.b : 1.0) * std::exp(sim(i, a) - mx);
            denom += weighted[a];
        }
        const double lse = mx + std::log(denom);
        const double w = 1.0 / static_cast<double>(positives);

        double anchor_sum = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            if (p == i || ann.labels[p] != ann.labels[i]) continue;
            const bool cross = ann.domains[p] != ann.domains[i];
            const double alpha = cross ? cfg.a : 1.0;
            if (similarity_mode) {
                anchor_sum += alpha * sim(i, p) - lse;
                coef(i, p) -= w * alpha;
            } else {
                anchor_sum += (cross ? log_a : 0.0) + sim(i, p) - lse;
                coef(i, p) -= w;
            }
        }
        r.value -= w * anchor_sum;
        for (std::size_t a = 0; a < n; ++a) {
            if (a != i) coef(i, a) += weighted[a] / denom;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        auto gi = r.grad.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double c = (coef(i, j) + coef(j, i)) * inv_tau;
            if (c == 0.0) continue;
            const auto zj = z.row(j);
            for (std::size_t k = 0; k < gi.size(); ++k) gi[k] += c * zj[k];
        }
    }
    if (!std::isfinite(r.value)) throw NumericalError("xdom_loss: non-finite value");
    require_finite(r.grad, "xdom_loss gradient");
    return r;
}

}  // namespace detail

LossWithGrad xdom_loss(const Tensor2& z, const BatchAnnotations& ann, const LossConfig& cfg) {
    for (std::size_t i = 0; i < z.rows(); ++i) {
        double sq = 0.0;
        for (double v : z.row(i)) sq += v * v;
        if (!(std::abs(sq - 1.0) <= 1e-9)) {
            throw ContractError("xdom_loss: row " + std::to_string(i) + " is not unit norm (|z|^2=" +
                                std::to_string(sq) + ")");
        }
    }
    return detail::xdom_loss_unchecked(z, ann, cfg);
}

FondLossResult fond_loss(const Tensor2& logits, const Tensor2& z, const BatchAnnotations& ann,
                         const LossConfig& cfg_in) {
    const LossConfig cfg = cfg_in.resolved();
    cfg.validate();
    ann.validate();
    check_labels(ann.labels, logits.rows(), logits.cols());

    const Tensor2 probs = softmax_forward(logits);
    const Tensor2 log_probs = log_softmax_forward(logits);

    FondLossResult r;
    LossWithGrad task = task_from(probs, log_probs, ann.labels);
    FairLossResult fair = fair_from(probs, log_probs, ann.labels, ann.linked);
    r.task = task.value;
    r.fair = fair.value;
    r.linked_task = fair.linked_task;
    r.shared_task = fair.shared_task;
    r.fair_empty_group = fair.empty_group;
    r.grad_logits = std::move(task.grad);

    if (cfg.lambda_fair > 0.0 && !fair.empty_group) {
        auto g = r.grad_logits.values();
        const auto f = fair.grad.values();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += cfg.lambda_fair * f[k];
    }

    if (cfg.lambda_xdom > 0.0 && logits.rows() >= 2) {
        if (z.rows() != logits.rows()) {
            throw DimensionError("fond_loss: projections " + z.shape_string() + " vs logits " +
                                 logits.shape_string());
        }
        LossWithGrad xd = xdom_loss(z, ann, cfg);
        r.xdom = xd.value;
        r.xdom_evaluated = true;
        r.grad_z = std::move(xd.grad);
        for (double& v : r.grad_z.values()) v *= cfg.lambda_xdom;
    } else {
        r.grad_z = Tensor2(z.rows(), z.cols());
    }

    r.total = r.task + cfg.lambda_xdom * r.xdom + cfg.lambda_fair * r.fair;
    if (!std::isfinite(r.total)) {
        throw NumericalError("fond_loss: non-finite total (task=" + std::to_string(r.task) +
                             " xdom=" + std::to_string(r.xdom) + " fair=" + std::to_string(r.fair) + ")");
    }
    return r;
}

}  // namespace fond
