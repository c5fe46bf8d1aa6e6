#include "fond_app/commands.hpp"

#include "CLI11.hpp"

#include <functional>
#include <iostream>
#include <map>

namespace {

using fond::app::CommandResult;
using fond::app::Json;
using fond::app::RunConfig;

struct CommonFlags {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
};

void add_common(CLI::App& sub, CommonFlags& f) {
    sub.add_option("--config", f.config, "JSON run configuration");
    sub.add_option("--set", f.overrides, "override one config key: dotted.key=value (repeatable)");
    sub.add_option("--seed", f.seed, "base seed for every derived stream");
    sub.add_option("--out", f.out, "output directory");
    sub.add_option("--jobs", f.jobs, "worker threads for search and benchmark")->check(CLI::PositiveNumber);
}

void report_error(const char* kind, int code, const std::string& message) {
    std::cerr << Json{{"status", "error"}, {"kind", kind}, {"exit_code", code}, {"message", message}}.dump()
              << std::endl;
}

void report_success(const CommandResult& r) {
    if (!r.summary.empty()) {
        std::cout << r.summary;
        if (r.summary.back() != '\n') std::cout << '\n';
    }
    for (const auto& p : r.outputs) std::cout << "wrote " << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-linked generalization training and evaluation", "fond"};
    app.require_subcommand(1);
    app.set_version_flag("--version", fond::app::kToolVersion);

    CommonFlags flags;
    using Command = std::function<CommandResult(RunConfig)>;
    const std::vector<std::tuple<const char*, const char*, Command>> commands{
        {"generate", "write a synthetic dataset CSV with its provenance", fond::app::cmd_generate},
        {"split", "write the class-to-domain plan for a dataset", fond::app::cmd_split},
        {"train", "train one model and evaluate it on the target domain", fond::app::cmd_train},
        {"search", "random search with training-domain validation, then final training", fond::app::cmd_search},
        {"benchmark", "all algorithms x settings x repetitions with an aggregate table", fond::app::cmd_benchmark},
        {"dump-embeddings", "write feature vectors h for every sample", fond::app::cmd_dump_embeddings},
    };
    std::map<const CLI::App*, Command> dispatch;
    for (const auto& [name, help, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(*sub, flags);
        dispatch[sub] = fn;
    }

    std::string rerun_file;
    std::string rerun_out = "rerun";
    std::size_t rerun_jobs = 1;
    CLI::App* rerun = app.add_subcommand("rerun", "repeat the run recorded in any output file's provenance");
    rerun->add_option("file", rerun_file, "file written by an earlier run")->required();
    rerun->add_option("--out", rerun_out, "output directory");
    rerun->add_option("--jobs", rerun_jobs, "worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("usage", 2, e.what());
        return 2;
    }

    try {
        if (rerun->parsed()) {
            report_success(fond::app::cmd_rerun(rerun_file, rerun_out, rerun_jobs));
            return 0;
        }
        for (const auto& [sub, fn] : dispatch) {
            if (!sub->parsed()) continue;
            fond::app::LoadOptions opts;
            if (!flags.config.empty()) opts.config_path = flags.config;
            opts.overrides = flags.overrides;
            opts.seed = flags.seed;
            opts.out = flags.out;
            opts.jobs = flags.jobs;
            report_success(fn(fond::app::load_run_config(opts)));
            return 0;
        }
    } catch (const fond::Error& e) {
        const int code = fond::app::exit_code_for(e.kind());
        report_error(fond::to_string(e.kind()), code, e.what());
        return code;
    } catch (const std::exception& e) {
        report_error("internal", 1, e.what());
        return 1;
    }
    return 0;
}
