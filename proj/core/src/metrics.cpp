#include "fond/metrics.hpp"

#include "fond/errors.hpp"

#include <algorithm>

namespace fond {

std::size_t argmax(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;
    }
    return best;
}

std::vector<int> predict(const ModelParams& params, std::span<const Sample> samples) {
    std::vector<int> out;
    out.reserve(samples.size());
    constexpr std::size_t kChunk = 1024;
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        const auto chunk = samples.subspan(start, std::min(kChunk, samples.size() - start));
        const Tensor2 logits = forward_classifier(params, forward_features(params, stack_features(chunk))).logits;
        for (std::size_t i = 0; i < logits.rows(); ++i) out.push_back(static_cast<int>(argmax(logits.row(i))));
    }
    return out;
}

MetricsReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                   const SplitPlan& plan) {
    if (labels.empty()) throw ContractError("evaluate: empty test set");
    if (predictions.size() != labels.size()) {
        throw DimensionError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                             std::to_string(labels.size()) + " labels");
    }
    const std::vector<int> classes = plan.classes();
    MetricsReport r;
    r.total = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::binary_search(classes.begin(), classes.end(), labels[i])) {
            throw ContractError("evaluate: test label " + std::to_string(labels[i]) + " is outside the plan's classes");
        }
        ClassStats& cs = r.per_class[labels[i]];
        ++cs.count;
        if (predictions[i] == labels[i]) ++cs.correct;
    }
    double sum_all = 0.0, sum_l = 0.0, sum_s = 0.0;
    std::size_t n_l = 0, n_s = 0;
    for (auto& [c, cs] : r.per_class) {
        cs.accuracy = static_cast<double>(cs.correct) / static_cast<double>(cs.count);
        sum_all += cs.accuracy;
        if (plan.is_linked(c)) {
            sum_l += cs.accuracy;
            ++n_l;
        } else {
            sum_s += cs.accuracy;
            ++n_s;
        }
    }
    for (int c : classes) {
        if (!r.per_class.count(c)) r.missing_classes.push_back(c);
    }
    r.class_averaged_accuracy = sum_all / static_cast<double>(r.per_class.size());
    if (n_l) r.y_l_accuracy = sum_l / static_cast<double>(n_l);
    if (n_s) r.y_s_accuracy = sum_s / static_cast<double>(n_s);
    return r;
}

MetricsReport evaluate(const ModelParams& params, std::span<const Sample> test, const SplitPlan& plan) {
    if (test.empty()) throw ContractError("evaluate: empty test set");
    const std::vector<int> predictions = predict(params, test);
    std::vector<int> labels;
    labels.reserve(test.size());
    for (const auto& s : test) labels.push_back(s.label);
    return evaluate_predictions(predictions, labels, plan);
}

}  // namespace fond
