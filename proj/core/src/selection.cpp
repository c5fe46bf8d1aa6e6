#include "fond/selection.hpp"

#include "fond/errors.hpp"
#include "fond/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace fond {

double Range::draw(Rng& rng) const {
    if (log_scale) return std::exp(rng.uniform(std::log(lo), std::log(hi)));
    return rng.uniform(lo, hi);
}

void HyperSpace::validate() const {
    auto check = [](const Range& r, const char* name, double min_lo) {
        if (!(r.lo <= r.hi) || !(r.lo >= min_lo) || (r.log_scale && !(r.lo > 0.0))) {
            throw ConfigError(std::string("invalid search range for ") + name);
        }
    };
    check(learning_rate, "learning_rate", 0.0);
    check(lambda_xdom, "lambda_xdom", 0.0);
    check(lambda_fair, "lambda_fair", 0.0);
    check(temperature, "temperature", 0.0);
    check(a, "a", 1.0);
    check(b, "b", 1.0);
    check(dropout, "dropout", 0.0);
    if (!(dropout.hi < 1.0)) throw ConfigError("dropout range must stay below 1");
    if (!(learning_rate.lo > 0.0) || !(temperature.lo > 0.0)) {
        throw ConfigError("learning_rate and temperature ranges must be positive");
    }
}

HyperSample draw_hyperparameters(const HyperSpace& space, Rng& rng) {
    HyperSample h;
    h.learning_rate = space.learning_rate.draw(rng);
    h.lambda_xdom = space.lambda_xdom.draw(rng);
    h.lambda_fair = space.lambda_fair.draw(rng);
    h.temperature = space.temperature.draw(rng);
    h.a = space.a.draw(rng);
    h.b = space.b.draw(rng);
    h.dropout = space.dropout.draw(rng);
    return h;
}

HyperSample hyperparameters_of(const LossConfig& loss, const TrainerConfig& trainer) {
    return {trainer.optimizer.learning_rate, loss.lambda_xdom, loss.lambda_fair, loss.temperature,
            loss.a, loss.b, trainer.dropout};
}

void apply_hyperparameters(const HyperSample& h, LossConfig& loss, TrainerConfig& trainer) {
    trainer.optimizer.learning_rate = h.learning_rate;
    trainer.dropout = h.dropout;
    loss.lambda_xdom = h.lambda_xdom;
    loss.lambda_fair = h.lambda_fair;
    loss.temperature = h.temperature;
    loss.a = h.a;
    loss.b = h.b;
}

FoldRunner default_fold_runner(const ExperimentSetup& base) {
    return [base](const FoldContext& ctx) {
        LossConfig loss = base.loss;
        TrainerConfig trainer = base.trainer;
        apply_hyperparameters(ctx.hyper, loss, trainer);
        trainer.seed = derive_seed(ctx.seed, 1);
        const ModelParams init = init_params(base.network, derive_seed(ctx.seed, 0));
        const TrainResult tr = train(init, ctx.train, ctx.validation, *ctx.plan, loss, trainer);
        const MetricsReport m = evaluate(tr.best_params, ctx.evaluation, *ctx.plan);
        return FoldOutcome{m.y_l_accuracy, m.y_s_accuracy};
    };
}

ValidationScore training_domain_validation(const HyperSample& hyper, const SplitData& split,
                                           const SplitPlan& plan, std::uint64_t seed,
                                           const FoldRunner& runner, std::size_t jobs) {
    const std::size_t k = plan.source_domains.size();
    if (k < 2) throw ConfigError("training-domain validation needs at least 2 source domains");

    struct FoldData {
        SplitPlan plan;
        std::vector<Sample> train, validation, evaluation;
    };
    std::vector<FoldData> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        const int held = plan.source_domains[f];
        FoldData& fd = folds[f];
        fd.plan = fold_plan(plan, held);
        for (const auto& s : split.train) {
            if (s.domain != held) fd.train.push_back(s);
        }
        for (const auto& s : split.validation) {
            if (s.domain != held) fd.validation.push_back(s);
        }
        const std::vector<int> fold_classes = fd.plan.classes();
        for (const auto& s : split.source_pool) {
            if (s.domain == held && std::binary_search(fold_classes.begin(), fold_classes.end(), s.label)) {
                fd.evaluation.push_back(s);
            }
        }
    }

    ValidationScore out;
    out.folds.resize(k);
    parallel_for(k, jobs, [&](std::size_t f) {
        const FoldData& fd = folds[f];
        FoldScore& fs = out.folds[f];
        fs.held_out = plan.source_domains[f];
        bool has_linked = false;
        for (const auto& s : fd.evaluation) {
            if (fd.plan.is_linked(s.label)) {
                has_linked = true;
                break;
            }
        }
        if (!has_linked) {
            fs.excluded = true;
            return;
        }
        FoldContext ctx{f, fs.held_out, &fd.plan, fd.train, fd.validation, fd.evaluation, hyper,
                        derive_seed(seed, f)};
        const FoldOutcome o = runner(ctx);
        fs.y_l_accuracy = o.y_l_accuracy;
        fs.y_s_accuracy = o.y_s_accuracy;
        if (!o.y_l_accuracy) fs.excluded = true;
    });

    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& fs : out.folds) {
        if (fs.excluded) continue;
        sum += *fs.y_l_accuracy;
        ++used;
    }
    if (used) out.score = sum / static_cast<double>(used);
    return out;
}

SearchResult random_search(const HyperSpace& space, std::size_t n_trials, std::uint64_t seed,
                           const TrialScorer& scorer, std::size_t jobs) {
    if (n_trials < 1) throw ConfigError("random search needs at least one trial");
    space.validate();
    SearchResult r;
    Rng rng(seed);
    r.trials.resize(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        r.trials[t].index = t;
        r.trials[t].hyper = draw_hyperparameters(space, rng);
    }
    parallel_for(n_trials, jobs, [&](std::size_t t) {
        r.trials[t].validation = scorer(r.trials[t].hyper, t);
    });
    std::optional<double> best_score;
    for (std::size_t t = 0; t < n_trials; ++t) {
        const auto& s = r.trials[t].validation.score;
        if (s && (!best_score || *s > *best_score)) {
            best_score = s;
            r.best_index = t;
        }
    }
    r.best = r.trials[r.best_index].hyper;
    return r;
}

RepetitionSeeds repetition_seeds(std::uint64_t base_seed, std::size_t repetition) {
    const std::uint64_t rep = derive_seed(base_seed, 1000 + repetition);
    return {derive_seed(rep, 1), derive_seed(rep, 2), derive_seed(rep, 3), derive_seed(rep, 4),
            derive_seed(rep, 5)};
}

RepetitionResult run_repetition(const Dataset& data, int target_domain, const SplitRequest& request,
                                const ExperimentSetup& setup, const ProtocolOptions& options,
                                const RepetitionSeeds& seeds) {
    std::vector<int> classes(data.num_classes);
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = static_cast<int>(c);

    return run_repetition(data, make_split_plan(classes, data.num_domains, target_domain, request, seeds.split),
                          setup, options, seeds);
}

RepetitionResult run_repetition(const Dataset& data, const SplitPlan& plan, const ExperimentSetup& setup,
                                const ProtocolOptions& options, const RepetitionSeeds& seeds) {
    RepetitionResult r;
    r.seeds = seeds;
    r.plan = plan;
    const SplitData split = apply_split(data, r.plan, setup.validation_fraction, seeds.validation);

    r.hyper = hyperparameters_of(setup.loss, setup.trainer);
    if (options.trials > 0) {
        const FoldRunner runner = default_fold_runner(setup);
        // Trials fan out across jobs; folds inside a trial run serially.
        r.search = random_search(options.space, options.trials, seeds.search,
                                 [&](const HyperSample& h, std::size_t t) {
                                     return training_domain_validation(h, split, r.plan,
                                                                       derive_seed(seeds.search, 100 + t), runner, 1);
                                 },
                                 options.jobs);
        r.hyper = r.search->best;
    }

    LossConfig loss = setup.loss;
    TrainerConfig trainer = setup.trainer;
    apply_hyperparameters(r.hyper, loss, trainer);
    trainer.seed = seeds.train;
    const ModelParams init = init_params(setup.network, seeds.init);
    r.training = train(init, split.train, split.validation, r.plan, loss, trainer);
    r.target = evaluate(r.training.best_params, split.target, r.plan);
    return r;
}

}  // namespace fond
