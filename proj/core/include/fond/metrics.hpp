#pragma once

#include "fond/dataset.hpp"
#include "fond/networks.hpp"
#include "fond/split.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace fond {

struct ClassStats {
    std::size_t count = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
};

// Class-averaged accuracies: each group's value is the plain mean of its
// member classes' accuracies, so class frequency does not weight the result.
struct MetricsReport {
    std::map<int, ClassStats> per_class;  // classes with at least one test sample
    std::vector<int> missing_classes;     // Y_T classes absent from the test set
    std::optional<double> y_l_accuracy;   // empty when no linked class is present
    std::optional<double> y_s_accuracy;
    double class_averaged_accuracy = 0.0;
    std::size_t total = 0;
};

// Index of the maximum entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> row);

std::vector<int> predict(const ModelParams& params, std::span<const Sample> samples);

MetricsReport evaluate_predictions(std::span<const int> predictions, std::span<const int> labels,
                                   const SplitPlan& plan);
MetricsReport evaluate(const ModelParams& params, std::span<const Sample> test, const SplitPlan& plan);

}  // namespace fond
