#include "fond/trainer.hpp"

#include "fond/errors.hpp"
#include "fond/metrics.hpp"
#include "fond/ops.hpp"
#include "fond/random.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace fond {

std::string to_string(SelectionMetric m) {
    return m == SelectionMetric::linked_accuracy ? "linked_accuracy" : "overall_accuracy";
}

SelectionMetric parse_selection_metric(const std::string& text) {
    if (text == "linked_accuracy") return SelectionMetric::linked_accuracy;
    if (text == "overall_accuracy") return SelectionMetric::overall_accuracy;
    throw ConfigError("unknown selection metric '" + text + "'");
}

void TrainerConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (eval_every < 1 || max_steps < eval_every) throw ConfigError("need max_steps >= eval_every >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    optimizer.validate();
}

TrainingBatch make_batch(std::span<const Sample> pool, std::span<const std::size_t> indices,
                         const SplitPlan& plan, std::size_t num_classes) {
    TrainingBatch b;
    b.features = stack_features(pool, indices);
    const std::vector<std::uint8_t> linked = plan.linked_mask(num_classes);
    b.annotations.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        const Sample& s = pool[i];
        b.annotations.labels.push_back(s.label);
        b.annotations.domains.push_back(s.domain);
        b.annotations.linked.push_back(
            s.label >= 0 && static_cast<std::size_t>(s.label) < num_classes ? linked[static_cast<std::size_t>(s.label)] : 0);
    }
    return b;
}

StepGradients compute_gradients(const ModelParams& params, const TrainingBatch& batch,
                                const LossConfig& loss_cfg, const Tensor2* dropout_mask) {
    const LossConfig cfg = loss_cfg.resolved();
    StepGradients out{params.zeros_like(), {}, 0.0};

    Mlp::Trace f_trace;
    const Tensor2 h_raw = params.feature.forward(batch.features, f_trace);
    const Tensor2 h = dropout_mask ? hadamard(h_raw, *dropout_mask) : h_raw;

    const bool use_projection = cfg.lambda_xdom > 0.0 && h.rows() >= 2;
    Mlp::Trace p_trace;
    NormalizedRows z;
    if (use_projection) z = l2_normalize_rows(params.projection.forward(h, p_trace));

    Mlp::Trace g_trace;
    const Tensor2 logits = params.classifier.forward(h, g_trace);

    out.loss = fond_loss(logits, z.output, batch.annotations, cfg);

    Tensor2 dh = params.classifier.backward(out.loss.grad_logits, g_trace, out.grads.classifier);
    if (use_projection) {
        const Tensor2 du = l2_normalize_backward(out.loss.grad_z, z);
        const Tensor2 dh_p = params.projection.backward(du, p_trace, out.grads.projection);
        auto d = dh.values();
        const auto s = dh_p.values();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
    if (dropout_mask) dh = hadamard(dh, *dropout_mask);
    params.feature.backward(dh, f_trace, out.grads.feature);

    double sq = 0.0;
    for (auto buf : std::as_const(out.grads).buffers()) {
        for (double v : buf) sq += v * v;
    }
    out.grad_norm = std::sqrt(sq);
    return out;
}

namespace {

double selection_score(const MetricsReport& m, SelectionMetric metric) {
    if (metric == SelectionMetric::linked_accuracy && m.y_l_accuracy) return *m.y_l_accuracy;
    return m.class_averaged_accuracy;
}

}  // namespace

TrainResult train(const ModelParams& init, std::span<const Sample> train_pool,
                  std::span<const Sample> validation, const SplitPlan& plan,
                  const LossConfig& loss_cfg, const TrainerConfig& cfg) {
    cfg.validate();
    const LossConfig lcfg = loss_cfg.resolved();
    lcfg.validate();
    if (train_pool.empty()) throw ContractError("train: empty training pool");

    std::vector<int> domains;
    domains.reserve(train_pool.size());
    for (const auto& s : train_pool) domains.push_back(s.domain);
    BatchStream stream(BatchSampler(std::move(domains), cfg.batch_size, derive_seed(cfg.seed, 1), cfg.sampling));
    Rng dropout_rng(derive_seed(cfg.seed, 2));

    const std::size_t num_classes = init.config.num_classes;
    TrainResult r{init, init, 0, -1.0, {}};
    ModelParams& params = r.final_params;
    OptimizerState opt_state;

    auto run_eval = [&](std::size_t step) {
        if (validation.empty()) return;
        const MetricsReport m = evaluate(params, validation, plan);
        EvalRecord e{step, m.y_l_accuracy, m.y_s_accuracy, m.class_averaged_accuracy,
                     selection_score(m, cfg.selection)};
        if (e.selection_score > r.best_score) {
            r.best_score = e.selection_score;
            r.best_step = step;
            r.best_params = params;
        }
        r.log.evals.push_back(e);
    };

    for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
        const auto& idx = stream.next();
        const TrainingBatch batch = make_batch(train_pool, idx, plan, num_classes);
        Tensor2 mask;
        if (cfg.dropout > 0.0) {
            mask = make_dropout_mask(batch.features.rows(), init.config.feature_dim, cfg.dropout, dropout_rng);
        }
        StepGradients g;
        try {
            g = compute_gradients(params, batch, lcfg, cfg.dropout > 0.0 ? &mask : nullptr);
        } catch (const NumericalError& e) {
            throw NumericalError("train: step " + std::to_string(step) + ": " + e.what());
        }
        const FondLossResult& L = g.loss;
        if (!std::isfinite(g.grad_norm)) {
            std::ostringstream os;
            os << "train: non-finite gradient at step " << step << " (task=" << L.task << " xdom=" << L.xdom
               << " fair=" << L.fair << " total=" << L.total << ")";
            throw NumericalError(os.str());
        }
        r.log.steps.push_back({step, idx.size(), L.task, L.xdom, L.fair, L.total, L.linked_task,
                               L.shared_task, L.fair_empty_group, g.grad_norm});
        optimizer_step(params, g.grads, opt_state, cfg.optimizer);
        if (step % cfg.eval_every == 0 || step == cfg.max_steps) run_eval(step);
    }
    if (validation.empty()) {
        r.best_params = params;
        r.best_step = cfg.max_steps;
        r.best_score = 0.0;
    }
    return r;
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void write_train_log_jsonl(const TrainLog& log, const std::filesystem::path& path,
                           const std::string& provenance_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    nlohmann::ordered_json head;
    head["type"] = "provenance";
    head["config"] = nlohmann::ordered_json::parse(provenance_json);
    os << head.dump() << '\n';

    std::size_t next_eval = 0;
    for (const auto& s : log.steps) {
        nlohmann::ordered_json j;
        j["type"] = "step";
        j["step"] = s.step;
        j["batch_size"] = s.batch_size;
        j["task"] = s.task;
        j["xdom"] = s.xdom;
        j["fair"] = s.fair;
        j["total"] = s.total;
        j["linked_task"] = s.linked_task;
        j["shared_task"] = s.shared_task;
        j["fair_empty_group"] = s.fair_empty_group;
        j["grad_norm"] = s.grad_norm;
        os << j.dump() << '\n';
        while (next_eval < log.evals.size() && log.evals[next_eval].step == s.step) {
            const auto& e = log.evals[next_eval++];
            nlohmann::ordered_json ej;
            ej["type"] = "eval";
            ej["step"] = e.step;
            ej["val_y_l_acc"] = optional_json(e.y_l_accuracy);
            ej["val_y_s_acc"] = optional_json(e.y_s_accuracy);
            ej["val_class_avg_acc"] = e.class_averaged_accuracy;
            ej["selection_score"] = e.selection_score;
            os << ej.dump() << '\n';
        }
    }
    if (!os) throw IoError("failed writing " + path.string());
}

void write_train_summary_csv(const TrainLog& log, const std::filesystem::path& path,
                             const std::string& provenance_json) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "# provenance " << provenance_json << '\n';
    os << "step,task,xdom,fair,total,val_y_l_acc,val_y_s_acc,val_class_avg_acc\n";
    std::size_t next_eval = 0;
    for (const auto& s : log.steps) {
        while (next_eval < log.evals.size() && log.evals[next_eval].step < s.step) ++next_eval;
        if (next_eval >= log.evals.size() || log.evals[next_eval].step != s.step) continue;
        const auto& e = log.evals[next_eval];
        os << s.step << ',' << csv_number(s.task) << ',' << csv_number(s.xdom) << ',' << csv_number(s.fair)
           << ',' << csv_number(s.total) << ',' << (e.y_l_accuracy ? csv_number(*e.y_l_accuracy) : "") << ','
           << (e.y_s_accuracy ? csv_number(*e.y_s_accuracy) : "") << ',' << csv_number(e.class_averaged_accuracy)
           << '\n';
    }
    if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace fond
