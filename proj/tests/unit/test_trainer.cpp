#include "doctest.h"

#include "oracles.hpp"

#include "fond/errors.hpp"
#include "fond/metrics.hpp"
#include "fond/ops.hpp"
#include "fond/optimizer.hpp"
#include "fond/random.hpp"
#include "fond/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fond;

namespace {

// Two well-separated classes in one source domain, d = 2.
std::vector<Sample> separable_pool(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> pool;
    for (int c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.id = pool.size();
            s.domain = 0;
            s.label = c;
            s.features = {(c == 0 ? -2.0 : 2.0) + 0.5 * rng.normal(), 0.5 * rng.normal()};
            pool.push_back(s);
        }
    }
    return pool;
}

SplitPlan single_domain_plan(int num_classes) {
    SplitPlan plan;
    plan.target_domain = 1;
    plan.source_domains = {0};
    for (int c = 0; c < num_classes; ++c) {
        plan.linked_classes.push_back(c);
        plan.assignment[c] = {0};
    }
    return plan;
}

// Three source domains, four classes: 0 and 1 linked, 2 and 3 shared.
struct SmallProblem {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    SplitPlan plan;
    NetworkConfig network;
};

SmallProblem small_problem() {
    SmallProblem p;
    p.plan.target_domain = 0;
    p.plan.source_domains = {1, 2, 3};
    p.plan.linked_classes = {0, 1};
    p.plan.shared_classes = {2, 3};
    p.plan.assignment = {{0, {1}}, {1, {2}}, {2, {1, 2}}, {3, {2, 3}}};
    Rng rng(5);
    for (const auto& [c, doms] : p.plan.assignment) {
        for (int d : doms) {
            for (int i = 0; i < 12; ++i) {
                Sample s;
                s.id = p.train.size() + p.validation.size();
                s.domain = d;
                s.label = c;
                for (int k = 0; k < 4; ++k) s.features.push_back(0.8 * (k == c ? 1.0 : 0.0) + 0.3 * d + rng.normal());
                (i < 10 ? p.train : p.validation).push_back(s);
            }
        }
    }
    p.network.input_dim = 4;
    p.network.feature_dim = 8;
    p.network.projection_dim = 4;
    p.network.num_classes = 4;
    p.network.feature_hidden = {8};
    p.network.projection_hidden = {16};
    return p;
}

TrainerConfig small_trainer(std::size_t steps) {
    TrainerConfig t;
    t.batch_size = 8;
    t.max_steps = steps;
    t.eval_every = std::min<std::size_t>(steps, 5);
    t.seed = 123;
    t.optimizer.learning_rate = 1e-2;
    return t;
}

LossConfig full_loss() {
    LossConfig l;
    l.temperature = 0.3;
    l.a = 2.0;
    l.b = 1.5;
    l.lambda_xdom = 0.5;
    l.lambda_fair = 0.4;
    return l;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("fond_trainer_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool logs_identical(const TrainLog& a, const TrainLog& b) {
    if (a.steps.size() != b.steps.size() || a.evals.size() != b.evals.size()) return false;
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        const StepRecord &x = a.steps[i], &y = b.steps[i];
        if (x.step != y.step || x.batch_size != y.batch_size || !same_bits(x.task, y.task) ||
            !same_bits(x.xdom, y.xdom) || !same_bits(x.fair, y.fair) || !same_bits(x.total, y.total) ||
            !same_bits(x.linked_task, y.linked_task) || !same_bits(x.shared_task, y.shared_task) ||
            x.fair_empty_group != y.fair_empty_group || !same_bits(x.grad_norm, y.grad_norm))
            return false;
    }
    for (std::size_t i = 0; i < a.evals.size(); ++i) {
        const EvalRecord &x = a.evals[i], &y = b.evals[i];
        if (x.step != y.step || x.y_l_accuracy != y.y_l_accuracy || x.y_s_accuracy != y.y_s_accuracy ||
            !same_bits(x.selection_score, y.selection_score))
            return false;
    }
    return true;
}

ModelParams filled_like(const ModelParams& p, double value) {
    ModelParams q = p.zeros_like();
    for (auto buf : q.buffers()) std::fill(buf.begin(), buf.end(), value);
    return q;
}

}  // namespace

TEST_SUITE("trainer") {

// --- optimizer ---------------------------------------------------------------------

TEST_CASE("optimizer config validation and names") {
    CHECK_NOTHROW(OptimizerConfig{}.validate());
    OptimizerConfig c;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig{};
    c.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = OptimizerConfig{};
    c.momentum = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    for (OptimizerKind k : {OptimizerKind::sgd, OptimizerKind::sgd_momentum, OptimizerKind::adam})
        CHECK(parse_optimizer(to_string(k)) == k);
    CHECK_THROWS_AS(parse_optimizer("rmsprop"), ConfigError);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
    const ModelParams init = init_params(small_problem().network, 4);
    for (OptimizerKind k : {OptimizerKind::sgd, OptimizerKind::sgd_momentum, OptimizerKind::adam}) {
        ModelParams p = init;
        OptimizerState state;
        OptimizerConfig cfg;
        cfg.kind = k;
        for (int i = 0; i < 3; ++i) optimizer_step(p, p.zeros_like(), state, cfg);
        CHECK(p == init);
        CHECK(state.step == 3);
    }
}

TEST_CASE("sgd with unit rate and gradient equal to the parameters gives zeros") {
    ModelParams p = init_params(small_problem().network, 4);
    const ModelParams g = p;
    OptimizerState state;
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 1.0;
    optimizer_step(p, g, state, cfg);
    for (auto buf : p.buffers())
        for (double v : buf) CHECK(v == 0.0);
}

TEST_CASE("first adam step is the bias-corrected sign-scaled gradient") {
    const ModelParams init = init_params(small_problem().network, 4);
    Rng rng(3);
    ModelParams g = init.zeros_like();
    for (auto buf : g.buffers())
        for (double& v : buf) v = rng.uniform(-2.0, 2.0);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.01;
    ModelParams p = init;
    OptimizerState state;
    optimizer_step(p, g, state, cfg);
    const auto before = init.buffers();
    const auto after = p.buffers();
    const auto grads = g.buffers();
    for (std::size_t b = 0; b < before.size(); ++b) {
        for (std::size_t k = 0; k < before[b].size(); ++k) {
            const double expected = -cfg.learning_rate * grads[b][k] / (std::abs(grads[b][k]) + cfg.epsilon);
            CHECK(after[b][k] - before[b][k] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("momentum and adam follow their recurrences over several steps") {
    const ModelParams init = init_params(small_problem().network, 4);
    const std::vector<double> gs{0.5, -1.0, 2.0};
    for (OptimizerKind k : {OptimizerKind::sgd_momentum, OptimizerKind::adam}) {
        OptimizerConfig cfg;
        cfg.kind = k;
        cfg.learning_rate = 0.1;
        ModelParams p = init;
        OptimizerState state;
        double theta = init.buffers()[0][0];
        double m = 0.0, v = 0.0;
        for (std::size_t t = 1; t <= gs.size(); ++t) {
            const double g = gs[t - 1];
            optimizer_step(p, filled_like(init, g), state, cfg);
            if (k == OptimizerKind::sgd_momentum) {
                m = cfg.momentum * m + g;
                theta -= cfg.learning_rate * m;
            } else {
                m = cfg.beta1 * m + (1 - cfg.beta1) * g;
                v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
                const double mh = m / (1 - std::pow(cfg.beta1, static_cast<double>(t)));
                const double vh = v / (1 - std::pow(cfg.beta2, static_cast<double>(t)));
                theta -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
            }
            CHECK(p.buffers()[0][0] == doctest::Approx(theta).epsilon(1e-12));
        }
    }
}

TEST_CASE("optimizer rejects mismatched gradients") {
    const SmallProblem sp = small_problem();
    ModelParams p = init_params(sp.network, 1);
    NetworkConfig other = sp.network;
    other.feature_hidden = {9};
    OptimizerState state;
    CHECK_THROWS_AS(optimizer_step(p, init_params(other, 1).zeros_like(), state, OptimizerConfig{}), DimensionError);
}

// --- training loop ------------------------------------------------------------------

TEST_CASE("trainer config validation") {
    CHECK_NOTHROW(small_trainer(10).validate());
    TrainerConfig t = small_trainer(10);
    t.eval_every = 11;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = small_trainer(10);
    t.batch_size = 1;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = small_trainer(10);
    t.dropout = 1.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = small_trainer(10);
    t.optimizer.learning_rate = -1.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    CHECK(parse_selection_metric(to_string(SelectionMetric::overall_accuracy)) == SelectionMetric::overall_accuracy);
}

TEST_CASE("separable toy reaches full training accuracy within 500 steps") {
    const std::vector<Sample> pool = separable_pool(50, 2);
    const SplitPlan plan = single_domain_plan(2);
    NetworkConfig net;
    net.input_dim = 2;
    net.feature_dim = 8;
    net.projection_dim = 4;
    net.num_classes = 2;
    net.feature_hidden = {8};
    LossConfig loss;
    loss.variant = Variant::erm;
    TrainerConfig cfg = small_trainer(500);
    cfg.batch_size = 16;
    cfg.eval_every = 50;
    const TrainResult r = train(init_params(net, 1), pool, {}, plan, loss, cfg);
    const std::vector<int> pred = predict(r.final_params, pool);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) correct += pred[i] == pool[i].label ? 1 : 0;
    CHECK(correct == pool.size());
    CHECK(r.log.steps.size() == 500);
    CHECK(r.log.evals.empty());
    CHECK(r.best_params == r.final_params);
}

TEST_CASE("identical seeds give bit-identical logs and parameters") {
    const SmallProblem sp = small_problem();
    TrainerConfig cfg = small_trainer(40);
    cfg.dropout = 0.3;
    const ModelParams init = init_params(sp.network, 8);
    const TrainResult a = train(init, sp.train, sp.validation, sp.plan, full_loss(), cfg);
    const TrainResult b = train(init, sp.train, sp.validation, sp.plan, full_loss(), cfg);
    CHECK(logs_identical(a.log, b.log));
    CHECK(a.final_params == b.final_params);
    CHECK(a.best_params == b.best_params);
    CHECK(a.best_step == b.best_step);

    const auto pa = temp_path("a.jsonl"), pb = temp_path("b.jsonl");
    write_train_log_jsonl(a.log, pa, "{}");
    write_train_log_jsonl(b.log, pb, "{}");
    CHECK(slurp(pa) == slurp(pb));
    std::filesystem::remove(pa);
    std::filesystem::remove(pb);

    TrainerConfig other = cfg;
    other.seed = 124;
    CHECK_FALSE(train(init, sp.train, sp.validation, sp.plan, full_loss(), other).final_params == a.final_params);
}

TEST_CASE("logged totals decompose into their components") {
    const SmallProblem sp = small_problem();
    for (AlphaMode mode : {AlphaMode::numerator_scale, AlphaMode::similarity_scale}) {
        LossConfig loss = full_loss();
        loss.alpha_mode = mode;
        const TrainResult r = train(init_params(sp.network, 2), sp.train, sp.validation, sp.plan, loss, small_trainer(60));
        REQUIRE(r.log.steps.size() == 60);
        std::size_t prev = 0;
        for (const StepRecord& s : r.log.steps) {
            CHECK(s.step == prev + 1);
            prev = s.step;
            CHECK(std::abs(s.total - (s.task + loss.lambda_xdom * s.xdom + loss.lambda_fair * s.fair)) <= 1e-12);
            CHECK(std::isfinite(s.grad_norm));
            if (!s.fair_empty_group) CHECK(s.fair == doctest::Approx(std::abs(s.linked_task - s.shared_task)));
        }
    }
}

TEST_CASE("one sgd step moves every parameter by minus rate times gradient") {
    const SmallProblem sp = small_problem();
    TrainerConfig cfg = small_trainer(1);
    cfg.optimizer.kind = OptimizerKind::sgd;
    cfg.optimizer.learning_rate = 0.05;
    const ModelParams init = init_params(sp.network, 6);
    const TrainResult r = train(init, sp.train, {}, sp.plan, full_loss(), cfg);

    std::vector<int> domains;
    for (const Sample& s : sp.train) domains.push_back(s.domain);
    const BatchSampler sampler(domains, cfg.batch_size, derive_seed(cfg.seed, 1));
    const auto first = sampler.epoch(0).front();
    const TrainingBatch batch = make_batch(sp.train, first, sp.plan, sp.network.num_classes);
    const StepGradients g = compute_gradients(init, batch, full_loss());

    const auto before = init.buffers();
    const auto after = r.final_params.buffers();
    const auto grads = g.grads.buffers();
    for (std::size_t b = 0; b < before.size(); ++b)
        for (std::size_t k = 0; k < before[b].size(); ++k)
            CHECK(after[b][k] == before[b][k] - cfg.optimizer.learning_rate * grads[b][k]);
    CHECK(r.log.steps.front().total == g.loss.total);
}

TEST_CASE("dropout is used in training passes only") {
    const SmallProblem sp = small_problem();
    const ModelParams init = init_params(sp.network, 3);
    TrainerConfig cfg = small_trainer(20);
    cfg.dropout = 0.5;
    const TrainResult with = train(init, sp.train, sp.validation, sp.plan, full_loss(), cfg);
    cfg.dropout = 0.0;
    const TrainResult without = train(init, sp.train, sp.validation, sp.plan, full_loss(), cfg);
    CHECK_FALSE(with.final_params == without.final_params);

    // Evaluation of a trained model is a pure function of its parameters.
    const MetricsReport m1 = evaluate(with.final_params, sp.validation, sp.plan);
    const MetricsReport m2 = evaluate(with.final_params, sp.validation, sp.plan);
    CHECK(m1.y_l_accuracy == m2.y_l_accuracy);
    CHECK(m1.y_s_accuracy == m2.y_s_accuracy);
    const EvalRecord& last = with.log.evals.back();
    CHECK(last.y_l_accuracy == m1.y_l_accuracy);

    // An all-ones mask is the same as no mask; an all-zeros mask removes h.
    const TrainingBatch batch = make_batch(sp.train, std::vector<std::size_t>{0, 5, 10, 15, 20, 25}, sp.plan, 4);
    const Tensor2 ones(6, sp.network.feature_dim, 1.0);
    const Tensor2 zeros(6, sp.network.feature_dim, 0.0);
    LossConfig task_only;
    task_only.variant = Variant::erm;
    CHECK(compute_gradients(init, batch, task_only, &ones).grads == compute_gradients(init, batch, task_only).grads);
    const StepGradients dropped = compute_gradients(init, batch, task_only, &zeros);
    for (double v : dropped.grads.classifier.layers[0].weights.values()) CHECK(v == 0.0);
    for (auto& layer : dropped.grads.feature.layers)
        for (double v : layer.weights.values()) CHECK(v == 0.0);
}

TEST_CASE("best snapshot is the earliest maximum of the validation score") {
    const SmallProblem sp = small_problem();
    TrainerConfig cfg = small_trainer(60);
    cfg.eval_every = 3;
    const TrainResult r = train(init_params(sp.network, 9), sp.train, sp.validation, sp.plan, full_loss(), cfg);
    REQUIRE(r.log.evals.size() == 20);
    double best = -1.0;
    std::size_t best_step = 0;
    for (const EvalRecord& e : r.log.evals) {
        CHECK(e.step % 3 == 0);
        if (e.selection_score > best) best = e.selection_score, best_step = e.step;
        REQUIRE(e.y_l_accuracy.has_value());
        CHECK(e.selection_score == *e.y_l_accuracy);
    }
    CHECK(r.best_score == best);
    CHECK(r.best_step == best_step);
    const MetricsReport m = evaluate(r.best_params, sp.validation, sp.plan);
    CHECK(*m.y_l_accuracy == best);
}

TEST_CASE("trainer matches an independent cross-entropy loop bit for bit") {
    const SmallProblem sp = small_problem();
    TrainerConfig cfg = small_trainer(50);
    const ModelParams init = init_params(sp.network, 12);
    const oracle::ErmTrajectory ref = oracle::erm_reference(init, sp.train, cfg);
    REQUIRE(ref.losses.size() == 50);

    LossConfig erm;
    erm.variant = Variant::erm;
    LossConfig zero = full_loss();
    zero.lambda_xdom = 0.0;
    zero.lambda_fair = 0.0;
    for (const LossConfig& loss : {erm, zero}) {
        const TrainResult r = train(init, sp.train, {}, sp.plan, loss, cfg);
        CHECK(r.final_params == ref.params);
        for (std::size_t i = 0; i < ref.losses.size(); ++i) CHECK(same_bits(r.log.steps[i].total, ref.losses[i]));
    }
}

TEST_CASE("non-finite losses abort with the step and components") {
    const SmallProblem sp = small_problem();
    TrainerConfig cfg = small_trainer(30);
    cfg.optimizer.kind = OptimizerKind::sgd;
    cfg.optimizer.learning_rate = 1e150;
    try {
        train(init_params(sp.network, 1), sp.train, {}, sp.plan, full_loss(), cfg);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("step") != std::string::npos);
    }
}

TEST_CASE("trainer rejects an empty pool") {
    const SmallProblem sp = small_problem();
    CHECK_THROWS_AS(train(init_params(sp.network, 1), {}, {}, sp.plan, full_loss(), small_trainer(5)), ContractError);
}

TEST_CASE("log writers embed provenance and one record per line") {
    const SmallProblem sp = small_problem();
    const TrainResult r = train(init_params(sp.network, 2), sp.train, sp.validation, sp.plan, full_loss(), small_trainer(10));
    const auto jsonl = temp_path("log.jsonl");
    const auto csv = temp_path("summary.csv");
    write_train_log_jsonl(r.log, jsonl, R"({"tool":"fond"})");
    write_train_summary_csv(r.log, csv, R"({"tool":"fond"})");

    std::ifstream in(jsonl);
    std::vector<std::string> lines;
    for (std::string s; std::getline(in, s);) lines.push_back(s);
    REQUIRE(lines.size() == 1 + r.log.steps.size() + r.log.evals.size());
    CHECK(lines.front() == R"({"type":"provenance","config":{"tool":"fond"}})");
    std::size_t steps = 0, evals = 0;
    for (const auto& l : lines) {
        steps += l.rfind(R"({"type":"step")", 0) == 0 ? 1 : 0;
        evals += l.rfind(R"({"type":"eval")", 0) == 0 ? 1 : 0;
    }
    CHECK(steps == r.log.steps.size());
    CHECK(evals == r.log.evals.size());

    const std::string summary = slurp(csv);
    CHECK(summary.rfind("# provenance {\"tool\":\"fond\"}\n", 0) == 0);
    std::filesystem::remove(jsonl);
    std::filesystem::remove(csv);
}

}  // TEST_SUITE
