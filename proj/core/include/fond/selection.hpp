#pragma once

// Model selection without touching the target domain: leave-one-source-domain-
// out validation scores a hyperparameter set, random search picks the set with
// the best score, and one repetition of the protocol trains the winner on all
// source domains and reports target-domain metrics.

#include "fond/dataset.hpp"
#include "fond/losses.hpp"
#include "fond/metrics.hpp"
#include "fond/networks.hpp"
#include "fond/random.hpp"
#include "fond/split.hpp"
#include "fond/trainer.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fond {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool log_scale = false;

    double draw(Rng& rng) const;
    friend bool operator==(const Range&, const Range&) = default;
};

struct HyperSpace {
    Range learning_rate{1e-5, 1e-2, true};
    Range lambda_xdom{0.1, 2.0, false};
    Range lambda_fair{0.1, 2.0, false};
    Range temperature{0.05, 0.5, true};
    Range a{1.0, 4.0, false};
    Range b{1.0, 4.0, false};
    Range dropout{0.0, 0.5, false};

    void validate() const;
    friend bool operator==(const HyperSpace&, const HyperSpace&) = default;
};

struct HyperSample {
    double learning_rate = 1e-3;
    double lambda_xdom = 1.0;
    double lambda_fair = 1.0;
    double temperature = 0.1;
    double a = 1.0;
    double b = 1.0;
    double dropout = 0.0;

    friend bool operator==(const HyperSample&, const HyperSample&) = default;
};

// All seven values are drawn for every trial, whatever the variant, so trial
// sequences are comparable across variants.
HyperSample draw_hyperparameters(const HyperSpace& space, Rng& rng);
HyperSample hyperparameters_of(const LossConfig& loss, const TrainerConfig& trainer);
void apply_hyperparameters(const HyperSample& h, LossConfig& loss, TrainerConfig& trainer);

struct ExperimentSetup {
    NetworkConfig network;
    LossConfig loss;
    TrainerConfig trainer;
    double validation_fraction = 0.2;
};

struct FoldContext {
    std::size_t fold_index = 0;
    int held_out = 0;
    const SplitPlan* plan = nullptr;  // fold view, see fold_plan()
    std::span<const Sample> train;
    std::span<const Sample> validation;
    std::span<const Sample> evaluation;  // held-out domain samples with classes in the fold plan
    HyperSample hyper;
    std::uint64_t seed = 0;
};

struct FoldOutcome {
    std::optional<double> y_l_accuracy;
    std::optional<double> y_s_accuracy;
};

using FoldRunner = std::function<FoldOutcome(const FoldContext&)>;

// Trains a fresh model on the fold and evaluates its best-validation snapshot
// on the held-out domain.
FoldRunner default_fold_runner(const ExperimentSetup& base);

struct FoldScore {
    int held_out = 0;
    std::optional<double> y_l_accuracy;
    std::optional<double> y_s_accuracy;
    bool excluded = false;  // held-out domain had no domain-linked class of the fold
};

struct ValidationScore {
    std::optional<double> score;  // mean fold Y_L accuracy over contributing folds
    std::vector<FoldScore> folds;
};

ValidationScore training_domain_validation(const HyperSample& hyper, const SplitData& split,
                                           const SplitPlan& plan, std::uint64_t seed,
                                           const FoldRunner& runner, std::size_t jobs = 1);

struct TrialRecord {
    std::size_t index = 0;
    HyperSample hyper;
    ValidationScore validation;
};

struct SearchResult {
    std::size_t best_index = 0;
    HyperSample best;
    std::vector<TrialRecord> trials;
};

using TrialScorer = std::function<ValidationScore(const HyperSample&, std::size_t trial_index)>;

// Draws n_trials configurations and keeps the highest score; the earliest trial
// wins ties, and trials without a score never beat one that has a score.
SearchResult random_search(const HyperSpace& space, std::size_t n_trials, std::uint64_t seed,
                           const TrialScorer& scorer, std::size_t jobs = 1);

struct RepetitionSeeds {
    std::uint64_t split = 0;
    std::uint64_t validation = 0;
    std::uint64_t search = 0;
    std::uint64_t init = 0;
    std::uint64_t train = 0;
};
RepetitionSeeds repetition_seeds(std::uint64_t base_seed, std::size_t repetition);

struct RepetitionResult {
    SplitPlan plan;
    RepetitionSeeds seeds;
    HyperSample hyper;
    std::optional<SearchResult> search;
    MetricsReport target;
    TrainResult training;
};

struct ProtocolOptions {
    std::size_t trials = 5;  // 0: use the setup's own hyperparameters without searching
    HyperSpace space;
    std::size_t jobs = 1;
};

// One repetition: plan, 80/20 source split, search, final training, target evaluation.
RepetitionResult run_repetition(const Dataset& data, int target_domain, const SplitRequest& request,
                                const ExperimentSetup& setup, const ProtocolOptions& options,
                                const RepetitionSeeds& seeds);
// Same, with a fixed plan instead of drawing one from seeds.split.
RepetitionResult run_repetition(const Dataset& data, const SplitPlan& plan, const ExperimentSetup& setup,
                                const ProtocolOptions& options, const RepetitionSeeds& seeds);

}  // namespace fond
