#include "fond/losses.hpp"
#include "fond/ops.hpp"
#include "fond/random.hpp"

#include <benchmark/benchmark.h>

using namespace fond;

namespace {

struct Inputs {
    Tensor2 logits;
    Tensor2 z;
    BatchAnnotations ann;
};

Inputs make_inputs(std::size_t n, std::size_t d, std::size_t classes, std::size_t domains) {
    Rng rng(1);
    Inputs in;
    in.logits = Tensor2(n, classes);
    for (double& v : in.logits.values()) v = rng.uniform(-2.0, 2.0);
    Tensor2 u(n, d);
    for (double& v : u.values()) v = rng.normal();
    in.z = l2_normalize_rows(u).output;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng.index(classes));
        in.ann.labels.push_back(y);
        in.ann.domains.push_back(static_cast<int>(rng.index(domains)));
        in.ann.linked.push_back(y % 2 == 0 ? 1 : 0);
    }
    return in;
}

LossConfig bench_config(AlphaMode mode) {
    LossConfig c;
    c.temperature = 0.1;
    c.a = 2.0;
    c.b = 3.0;
    c.alpha_mode = mode;
    return c;
}

}  // namespace

// --- contrastive term -------------------------------------------------------------

static void BM_xdom_loss(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Inputs in = make_inputs(n, 64, 6, 3);
    const LossConfig cfg = bench_config(static_cast<AlphaMode>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(xdom_loss(in.z, in.ann, cfg));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_xdom_loss)
    ->ArgsProduct({{16, 32, 64, 128, 256}, {static_cast<long>(AlphaMode::numerator_scale),
                                            static_cast<long>(AlphaMode::similarity_scale)}})
    ->Complexity(benchmark::oNSquared);

// --- full objective ------------------------------------------------------------------

static void BM_fond_loss(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Inputs in = make_inputs(n, 64, 6, 3);
    LossConfig cfg = bench_config(AlphaMode::numerator_scale);
    cfg.lambda_xdom = 0.5;
    cfg.lambda_fair = 0.3;
    for (auto _ : state) benchmark::DoNotOptimize(fond_loss(in.logits, in.z, in.ann, cfg));
}
BENCHMARK(BM_fond_loss)->RangeMultiplier(2)->Range(16, 256);
