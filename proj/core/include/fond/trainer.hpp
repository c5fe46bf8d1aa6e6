#pragma once

#include "fond/dataset.hpp"
#include "fond/losses.hpp"
#include "fond/networks.hpp"
#include "fond/optimizer.hpp"
#include "fond/sampler.hpp"
#include "fond/split.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fond {

enum class SelectionMetric { linked_accuracy, overall_accuracy };

std::string to_string(SelectionMetric m);
SelectionMetric parse_selection_metric(const std::string& text);

struct TrainerConfig {
    std::size_t batch_size = 64;
    OptimizerConfig optimizer;
    std::size_t max_steps = 1000;
    std::size_t eval_every = 100;
    std::uint64_t seed = 0;
    double dropout = 0.0;  // applied to h, training passes only
    SamplingMode sampling = SamplingMode::pooled;
    SelectionMetric selection = SelectionMetric::linked_accuracy;

    void validate() const;
};

struct StepRecord {
    std::size_t step = 0;
    std::size_t batch_size = 0;
    double task = 0.0;
    double xdom = 0.0;
    double fair = 0.0;
    double total = 0.0;
    double linked_task = 0.0;
    double shared_task = 0.0;
    bool fair_empty_group = false;
    double grad_norm = 0.0;
};

struct EvalRecord {
    std::size_t step = 0;
    std::optional<double> y_l_accuracy;
    std::optional<double> y_s_accuracy;
    double class_averaged_accuracy = 0.0;
    double selection_score = 0.0;
};

struct TrainLog {
    std::vector<StepRecord> steps;
    std::vector<EvalRecord> evals;
};

struct TrainResult {
    ModelParams final_params;
    ModelParams best_params;
    std::size_t best_step = 0;
    double best_score = 0.0;
    TrainLog log;
};

struct TrainingBatch {
    Tensor2 features;
    BatchAnnotations annotations;
};

TrainingBatch make_batch(std::span<const Sample> pool, std::span<const std::size_t> indices,
                         const SplitPlan& plan, std::size_t num_classes);

struct StepGradients {
    ModelParams grads;
    FondLossResult loss;
    double grad_norm = 0.0;
};

// One forward/backward pass: F, then P on h for the contrastive term, G on h
// for the task and fairness terms. `dropout_mask` (same shape as h) is applied
// to h before both heads when non-null.
StepGradients compute_gradients(const ModelParams& params, const TrainingBatch& batch,
                                const LossConfig& loss_cfg, const Tensor2* dropout_mask = nullptr);

// Fixed-step training with periodic validation. Returns the final parameters and
// the snapshot with the best validation score (earliest wins ties). Throws
// NumericalError on a non-finite loss, naming the step and loss components.
TrainResult train(const ModelParams& init, std::span<const Sample> train_pool,
                  std::span<const Sample> validation, const SplitPlan& plan,
                  const LossConfig& loss_cfg, const TrainerConfig& cfg);

// One JSON object per line; the first line is {"type":"provenance",...}.
void write_train_log_jsonl(const TrainLog& log, const std::filesystem::path& path,
                           const std::string& provenance_json);
void write_train_summary_csv(const TrainLog& log, const std::filesystem::path& path,
                             const std::string& provenance_json);

}  // namespace fond
