#include "fond_app/commands.hpp"

#include "fond/metrics.hpp"
#include "fond/parallel.hpp"
#include "fond/trainer.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fond::app {

namespace {

namespace fs = std::filesystem;

// --- output helpers --------------------------------------------------------

std::string num(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

fs::path ensure_out(const RunConfig& cfg) {
    const fs::path out(cfg.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json seeds_json(const RunConfig& cfg, const RepetitionSeeds& s, std::size_t repetition) {
    return Json{{"base", cfg.seed},       {"repetition", repetition}, {"dataset", cfg.dataset.seed},
                {"split", s.split},       {"validation", s.validation}, {"search", s.search},
                {"init", s.init},         {"train", s.train}};
}

Json hyper_json(const HyperSample& h) {
    return Json{{"learning_rate", h.learning_rate}, {"lambda_xdom", h.lambda_xdom},
                {"lambda_fair", h.lambda_fair},     {"temperature", h.temperature},
                {"a", h.a},                         {"b", h.b},
                {"dropout", h.dropout}};
}

Json metrics_json(const MetricsReport& m) {
    Json per_class = Json::object();
    for (const auto& [c, st] : m.per_class) {
        per_class[std::to_string(c)] = {{"count", st.count}, {"correct", st.correct}, {"accuracy", st.accuracy}};
    }
    return Json{{"y_l_accuracy", optional_json(m.y_l_accuracy)},
                {"y_s_accuracy", optional_json(m.y_s_accuracy)},
                {"class_averaged_accuracy", m.class_averaged_accuracy},
                {"total", m.total},
                {"per_class", per_class},
                {"missing_classes", m.missing_classes}};
}

std::vector<int> class_ids(const Dataset& data) {
    std::vector<int> classes(data.num_classes);
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = static_cast<int>(c);
    return classes;
}

SplitPlan resolve_plan(const RunConfig& cfg, const Dataset& data, const RepetitionSeeds& seeds) {
    if (!cfg.split.plan_path.empty()) {
        SplitPlan plan = load_split_plan(cfg.split.plan_path);
        validate_split_plan(plan, data.num_domains);
        return plan;
    }
    return make_split_plan(class_ids(data), data.num_domains, cfg.split.target_domain,
                           split_request(cfg.split), seeds.split);
}

RunRecord run_record(const RunConfig& cfg, const RepetitionResult& r, std::size_t repetition) {
    return RunRecord{cfg.dataset.name, r.plan.setting, to_string(cfg.loss.variant), cfg.seed, repetition, r.target};
}

// Shared tail of train and search: checkpoint, logs, metrics, results.
void write_run_outputs(const fs::path& out, const RunConfig& cfg, const Dataset& data, const RepetitionResult& r,
                       const std::string& prov, CommandResult& result) {
    const fs::path ckpt = out / "checkpoint.txt";
    save_checkpoint(r.training.best_params, ckpt, prov);
    const fs::path log = out / "train_log.jsonl";
    write_train_log_jsonl(r.training.log, log, prov);
    const fs::path summary = out / "train_summary.csv";
    write_train_summary_csv(r.training.log, summary, prov);

    Json metrics{{"provenance", Json::parse(prov)},
                 {"best_step", r.training.best_step},
                 {"best_score", r.training.best_score},
                 {"hyperparameters", hyper_json(r.hyper)},
                 {"target", metrics_json(r.target)}};
    const fs::path metrics_path = out / "metrics.json";
    write_text(metrics_path, metrics.dump(2) + "\n");

    const std::vector<RunRecord> runs{run_record(cfg, r, cfg.protocol.repetition)};
    const fs::path results = out / "results.csv";
    write_results_csv(runs, data.num_classes, results, prov);

    result.outputs.insert(result.outputs.end(), {ckpt, log, summary, metrics_path, results});
    std::ostringstream os;
    os << "target Y_L " << opt_num(r.target.y_l_accuracy) << " Y_S " << opt_num(r.target.y_s_accuracy)
       << " (best step " << r.training.best_step << ")";
    result.summary = os.str();
}

Json parse_provenance_text(const std::string& text, const fs::path& path) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("malformed provenance record in " + path.string(), 1);
    return j;
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

// --- shared pieces -----------------------------------------------------------

Dataset load_dataset(RunConfig& cfg) {
    Dataset data;
    if (cfg.dataset.source == "synthetic") {
        data = generate_synthetic(cfg.dataset.synthetic, cfg.dataset.seed).data;
    } else {
        data = ingest_csv(cfg.dataset.csv_path);
    }
    NetworkConfig& n = cfg.network;
    if (n.input_dim != 0 && n.input_dim != data.input_dim) {
        throw ConfigError("network.input_dim " + std::to_string(n.input_dim) + " does not match the dataset (" +
                          std::to_string(data.input_dim) + ")");
    }
    if (n.num_classes != 0 && n.num_classes != data.num_classes) {
        throw ConfigError("network.num_classes " + std::to_string(n.num_classes) + " does not match the dataset (" +
                          std::to_string(data.num_classes) + ")");
    }
    n.input_dim = data.input_dim;
    n.num_classes = data.num_classes;
    n.validate();
    if (cfg.split.target_domain >= static_cast<int>(data.num_domains)) {
        throw ConfigError("split.target_domain " + std::to_string(cfg.split.target_domain) + " is not a domain of the dataset");
    }
    return data;
}

std::string dataset_fingerprint(const Dataset& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a(h, data.input_dim);
    h = fnv1a(h, data.num_classes);
    h = fnv1a(h, data.num_domains);
    for (const auto& s : data.samples) {
        h = fnv1a(h, s.id);
        h = fnv1a(h, static_cast<std::uint64_t>(s.domain));
        h = fnv1a(h, static_cast<std::uint64_t>(s.label));
        for (double v : s.features) h = fnv1a(h, std::bit_cast<std::uint64_t>(v));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string provenance_json(const std::string& command, const RunConfig& cfg, const Json& seeds,
                            const std::string& fingerprint) {
    Json p{{"tool", "fond"},
           {"version", kToolVersion},
           {"command", command},
           {"config", to_json(cfg, false)},
           {"seeds", seeds},
           {"dataset_fingerprint", fingerprint}};
    return p.dump();
}

Json read_provenance(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    for (std::size_t n = 0; n < 8 && std::getline(in, line); ++n) {
        for (const char* prefix : {"# provenance ", "provenance ", "<!-- provenance "}) {
            const std::string p(prefix);
            if (line.rfind(p, 0) != 0) continue;
            std::string body = line.substr(p.size());
            if (p.front() == '<') {
                const auto end = body.rfind(" -->");
                if (end == std::string::npos) throw ParseError("unterminated provenance comment in " + path.string(), n + 1);
                body.resize(end);
            }
            return parse_provenance_text(body, path);
        }
        if (!line.empty() && line.front() == '{') {
            Json j = Json::parse(line, nullptr, false);
            if (!j.is_discarded() && j.is_object() && j.value("type", "") == "provenance" && j.contains("config")) {
                return j["config"];
            }
        }
    }
    // Files that are a single JSON document (provenance.json, metrics.json).
    in.clear();
    in.seekg(0);
    std::stringstream ss;
    ss << in.rdbuf();
    Json j = Json::parse(ss.str(), nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
        if (j.contains("tool") && j.contains("config")) return j;
        if (j.contains("provenance")) return j["provenance"];
    }
    throw ParseError("no provenance record found in " + path.string(), 1);
}

BenchmarkRun run_benchmark(RunConfig& cfg, const Dataset& data) {
    if (!cfg.split.plan_path.empty()) {
        throw ConfigError("split.plan_path cannot be combined with benchmark, which draws plans per setting");
    }
    struct Job {
        std::string setting;
        Variant variant;
        std::size_t repetition;
    };
    std::vector<Job> jobs;
    for (const auto& s : cfg.protocol.settings) {
        for (const auto& a : cfg.protocol.algorithms) {
            for (std::size_t r = 0; r < cfg.protocol.repetitions; ++r) {
                jobs.push_back({to_string(parse_shared_setting(s)), parse_variant(a), r});
            }
        }
    }
    BenchmarkRun run;
    run.num_classes = data.num_classes;
    run.records.resize(jobs.size());
    ProtocolOptions options = protocol_options(cfg);
    options.jobs = 1;
    parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
        const Job& job = jobs[i];
        ExperimentSetup setup = experiment_setup(cfg);
        setup.loss.variant = job.variant;
        SplitRequest request;
        request.setting = parse_shared_setting(job.setting);
        const RepetitionSeeds seeds = repetition_seeds(cfg.seed, job.repetition);
        const RepetitionResult r = run_repetition(data, cfg.split.target_domain, request, setup, options, seeds);
        run.records[i] = RunRecord{cfg.dataset.name, job.setting, to_string(job.variant), cfg.seed, job.repetition,
                                   r.target};
    });
    run.cells = aggregate(run.records);
    return run;
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::contract:
        case ErrorKind::plan_mismatch: return 2;
        case ErrorKind::numerical:
        case ErrorKind::dimension:
        case ErrorKind::degenerate_input: return 3;
        case ErrorKind::io:
        case ErrorKind::parse: return 4;
    }
    return 1;
}

// --- commands ------------------------------------------------------------------

CommandResult cmd_generate(RunConfig cfg) {
    if (cfg.dataset.source != "synthetic") throw ConfigError("generate requires dataset.source 'synthetic'");
    const Dataset data = load_dataset(cfg);
    const std::string prov = provenance_json("generate", cfg, Json{{"dataset", cfg.dataset.seed}},
                                             dataset_fingerprint(data));
    const fs::path out = ensure_out(cfg);
    CommandResult result;
    const fs::path csv = out / "dataset.csv";
    export_csv(data, csv, {"provenance " + prov});
    const fs::path prov_path = out / "provenance.json";
    write_text(prov_path, Json::parse(prov).dump(2) + "\n");
    result.outputs = {csv, prov_path};
    result.summary = "wrote " + std::to_string(data.samples.size()) + " samples (" +
                     std::to_string(data.num_domains) + " domains, " + std::to_string(data.num_classes) +
                     " classes, d=" + std::to_string(data.input_dim) + ")";
    return result;
}

CommandResult cmd_split(RunConfig cfg) {
    const Dataset data = load_dataset(cfg);
    const RepetitionSeeds seeds = repetition_seeds(cfg.seed, cfg.protocol.repetition);
    const SplitPlan plan = resolve_plan(cfg, data, seeds);
    const std::string prov = provenance_json("split", cfg, seeds_json(cfg, seeds, cfg.protocol.repetition),
                                             dataset_fingerprint(data));
    const fs::path out = ensure_out(cfg);
    const fs::path path = out / "split_plan.txt";
    write_text(path, "# provenance " + prov + "\n" + format_split_plan(plan));
    CommandResult result;
    result.outputs = {path};
    result.summary = "target domain " + std::to_string(plan.target_domain) + ": |Y_S|=" +
                     std::to_string(plan.shared_classes.size()) + " |Y_L|=" +
                     std::to_string(plan.linked_classes.size()) + " (" + plan.setting + ")";
    return result;
}

CommandResult cmd_train(RunConfig cfg) {
    const Dataset data = load_dataset(cfg);
    const RepetitionSeeds seeds = repetition_seeds(cfg.seed, cfg.protocol.repetition);
    const SplitPlan plan = resolve_plan(cfg, data, seeds);
    ProtocolOptions options = protocol_options(cfg);
    options.trials = 0;
    const RepetitionResult r = run_repetition(data, plan, experiment_setup(cfg), options, seeds);
    const std::string prov = provenance_json("train", cfg, seeds_json(cfg, seeds, cfg.protocol.repetition),
                                             dataset_fingerprint(data));
    CommandResult result;
    write_run_outputs(ensure_out(cfg), cfg, data, r, prov, result);
    return result;
}

CommandResult cmd_search(RunConfig cfg) {
    if (cfg.search.trials < 1) throw ConfigError("search.trials must be >= 1 for search");
    const Dataset data = load_dataset(cfg);
    const RepetitionSeeds seeds = repetition_seeds(cfg.seed, cfg.protocol.repetition);
    const SplitPlan plan = resolve_plan(cfg, data, seeds);
    const RepetitionResult r = run_repetition(data, plan, experiment_setup(cfg), protocol_options(cfg), seeds);
    const std::string prov = provenance_json("search", cfg, seeds_json(cfg, seeds, cfg.protocol.repetition),
                                             dataset_fingerprint(data));
    const fs::path out = ensure_out(cfg);
    CommandResult result;

    const SearchResult& search = *r.search;
    const std::size_t folds = plan.source_domains.size();
    std::ostringstream trials;
    trials << "# provenance " << prov << '\n';
    trials << "trial,learning_rate,lambda_xdom,lambda_fair,temperature,a,b,dropout,score,selected";
    for (std::size_t k = 0; k < folds; ++k) {
        trials << ",fold_" << k << "_held_out,fold_" << k << "_y_l,fold_" << k << "_y_s,fold_" << k << "_excluded";
    }
    trials << '\n';
    for (const auto& t : search.trials) {
        const HyperSample& h = t.hyper;
        trials << t.index << ',' << num(h.learning_rate) << ',' << num(h.lambda_xdom) << ',' << num(h.lambda_fair)
               << ',' << num(h.temperature) << ',' << num(h.a) << ',' << num(h.b) << ',' << num(h.dropout) << ','
               << opt_num(t.validation.score) << ',' << (t.index == search.best_index ? 1 : 0);
        for (const auto& f : t.validation.folds) {
            trials << ',' << f.held_out << ',' << opt_num(f.y_l_accuracy) << ',' << opt_num(f.y_s_accuracy) << ','
                   << (f.excluded ? 1 : 0);
        }
        trials << '\n';
    }
    const fs::path trials_path = out / "trials.csv";
    write_text(trials_path, trials.str());

    Json winner{{"provenance", Json::parse(prov)},
                {"best_index", search.best_index},
                {"score", optional_json(search.trials[search.best_index].validation.score)},
                {"hyperparameters", hyper_json(search.best)}};
    const fs::path winner_path = out / "winner.json";
    write_text(winner_path, winner.dump(2) + "\n");

    write_run_outputs(out, cfg, data, r, prov, result);
    result.outputs.insert(result.outputs.begin(), {trials_path, winner_path});
    result.summary = "winner trial " + std::to_string(search.best_index) + "; " + result.summary;
    return result;
}

CommandResult cmd_benchmark(RunConfig cfg) {
    const Dataset data = load_dataset(cfg);
    const BenchmarkRun run = run_benchmark(cfg, data);
    Json seeds{{"base", cfg.seed}, {"dataset", cfg.dataset.seed}, {"repetitions", Json::array()}};
    for (std::size_t r = 0; r < cfg.protocol.repetitions; ++r) {
        seeds["repetitions"].push_back(seeds_json(cfg, repetition_seeds(cfg.seed, r), r));
    }
    const std::string prov = provenance_json("benchmark", cfg, seeds, dataset_fingerprint(data));
    const fs::path out = ensure_out(cfg);
    const fs::path results = out / "results.csv";
    write_results_csv(run.records, run.num_classes, results, prov);
    const fs::path agg = out / "aggregate.csv";
    write_aggregate_csv(run.cells, agg, prov);
    const std::string table = format_aggregate_table(run.cells);
    const fs::path table_path = out / "table.md";
    write_text(table_path, "<!-- provenance " + prov + " -->\n" + table);
    CommandResult result;
    result.outputs = {results, agg, table_path};
    result.summary = table;
    return result;
}

CommandResult cmd_dump_embeddings(RunConfig cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("dump-embeddings requires 'checkpoint'");
    const Dataset data = load_dataset(cfg);
    const ModelParams params = load_checkpoint(cfg.checkpoint);
    if (params.config.input_dim != data.input_dim || params.config.num_classes != data.num_classes) {
        throw ConfigError("checkpoint " + cfg.checkpoint + " was trained for different input or class dimensions");
    }
    const RepetitionSeeds seeds = repetition_seeds(cfg.seed, cfg.protocol.repetition);
    const SplitPlan plan = resolve_plan(cfg, data, seeds);
    const std::string prov = provenance_json("dump-embeddings", cfg, seeds_json(cfg, seeds, cfg.protocol.repetition),
                                             dataset_fingerprint(data));
    const fs::path path = ensure_out(cfg) / "embeddings.csv";
    dump_embeddings(params, data.samples, plan, path, prov);
    CommandResult result;
    result.outputs = {path};
    result.summary = "wrote " + std::to_string(data.samples.size()) + " embeddings of dimension " +
                     std::to_string(params.config.feature_dim);
    return result;
}

CommandResult cmd_rerun(const fs::path& file, const std::string& out, std::size_t jobs) {
    const Json prov = read_provenance(file);
    if (!prov.contains("command") || !prov.contains("config")) {
        throw ParseError("provenance record in " + file.string() + " lacks command or config", 1);
    }
    RunConfig cfg = from_json(prov["config"]);
    cfg.out = out;
    cfg.jobs = jobs;
    validate(cfg);
    {
        RunConfig probe = cfg;
        const std::string fp = dataset_fingerprint(load_dataset(probe));
        if (prov.value("dataset_fingerprint", fp) != fp) {
            throw ConfigError("dataset no longer matches the fingerprint recorded in " + file.string());
        }
    }
    const std::string command = prov["command"].get<std::string>();
    if (command == "generate") return cmd_generate(cfg);
    if (command == "split") return cmd_split(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "search") return cmd_search(cfg);
    if (command == "benchmark") return cmd_benchmark(cfg);
    if (command == "dump-embeddings") return cmd_dump_embeddings(cfg);
    throw ConfigError("unknown recorded command '" + command + "'");
}

}  // namespace fond::app
