#include "fond/dataset.hpp"
#include "fond/optimizer.hpp"
#include "fond/split.hpp"
#include "fond/trainer.hpp"

#include <benchmark/benchmark.h>

#include <numeric>

using namespace fond;

namespace {

struct Problem {
    Dataset data;
    SplitPlan plan;
    NetworkConfig network;
};

Problem make_problem() {
    SyntheticSpec spec;
    spec.input_dim = 16;
    spec.samples_per_cell = 100;
    spec.style_dims = 2;
    Problem p;
    p.data = generate_synthetic(spec, 7).data;
    SplitRequest req;
    p.plan = make_split_plan({0, 1, 2, 3, 4, 5}, 4, 0, req, 1);
    p.network.input_dim = 16;
    p.network.num_classes = 6;
    p.network.feature_dim = 64;
    p.network.feature_hidden = {64, 64};
    p.network.projection_dim = 64;
    p.network.projection_identity = true;
    return p;
}

}  // namespace

// --- one optimizer step --------------------------------------------------------------

static void BM_train_step(benchmark::State& state) {
    const Problem p = make_problem();
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) idx[i] = (i * 37) % p.data.samples.size();
    const TrainingBatch batch = make_batch(p.data.samples, idx, p.plan, p.network.num_classes);
    LossConfig loss;
    loss.variant = static_cast<Variant>(state.range(1));
    loss.temperature = 0.2;
    loss.lambda_xdom = 0.5;
    loss.lambda_fair = 0.3;
    ModelParams params = init_params(p.network, 3);
    OptimizerState opt;
    const OptimizerConfig opt_cfg;
    for (auto _ : state) {
        const StepGradients g = compute_gradients(params, batch, loss);
        optimizer_step(params, g.grads, opt, opt_cfg);
        benchmark::DoNotOptimize(g.loss.total);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_train_step)
    ->ArgsProduct({{32, 64, 128}, {static_cast<long>(Variant::erm), static_cast<long>(Variant::fond)}});
