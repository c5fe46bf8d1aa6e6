#pragma once

// Cross-repetition aggregation and the results/embedding file writers.

#include "fond/dataset.hpp"
#include "fond/metrics.hpp"
#include "fond/networks.hpp"
#include "fond/split.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fond {

struct RunRecord {
    std::string dataset;
    std::string setting;
    std::string algorithm;
    std::uint64_t seed = 0;
    std::size_t repetition = 0;
    MetricsReport metrics;
};

struct MeanSe {
    double mean = 0.0;
    std::optional<double> se;  // sample stddev / sqrt(n); empty for n = 1
};
MeanSe mean_and_standard_error(std::span<const double> values);

struct AggregateCell {
    std::string dataset;
    std::string setting;
    std::string algorithm;
    std::size_t repetitions = 0;
    MeanSe y_l;
    MeanSe y_s;
};

// One cell per (dataset, setting, algorithm), in order of first appearance.
std::vector<AggregateCell> aggregate(std::span<const RunRecord> runs);

// Per-run rows: dataset,setting,algorithm,seed,repetition,y_l_acc,y_s_acc,class_<c>_acc...
void write_results_csv(std::span<const RunRecord> runs, std::size_t num_classes,
                       const std::filesystem::path& path, const std::string& provenance_json);

// Table layout: one row per (setting, algorithm); per dataset the Y_L and Y_S
// mean and standard error columns.
void write_aggregate_csv(std::span<const AggregateCell> cells, const std::filesystem::path& path,
                         const std::string& provenance_json);
std::string format_aggregate_table(std::span<const AggregateCell> cells);

// CSV of id,domain,label,group,h_0..h_{d_F-1}; group is linked, shared or unassigned.
void dump_embeddings(const ModelParams& params, std::span<const Sample> samples, const SplitPlan& plan,
                     const std::filesystem::path& path, const std::string& provenance_json);

}  // namespace fond
