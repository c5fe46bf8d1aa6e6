#pragma once

// Run configuration for the command-line tool: one JSON document, layered as
// built-in defaults < config file < --set overrides < dedicated flags, then
// parsed strictly (unknown keys and wrong types are ConfigErrors).

#include "fond/dataset.hpp"
#include "fond/losses.hpp"
#include "fond/networks.hpp"
#include "fond/selection.hpp"
#include "fond/split.hpp"
#include "fond/trainer.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fond::app {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

struct DatasetSection {
    std::string name = "synthetic";
    std::string source = "synthetic";  // synthetic | csv
    std::string csv_path;
    std::uint64_t seed = 7;  // generator seed
    SyntheticSpec synthetic;
};

struct SplitSection {
    std::string setting = "High";  // Low | High | explicit
    std::size_t shared_count = 0;  // used with setting = explicit
    int target_domain = 0;
    std::string plan_path;  // load this plan instead of drawing one
};

struct SearchSection {
    std::size_t trials = 5;
    HyperSpace space;
};

struct ProtocolSection {
    std::size_t repetitions = 3;  // benchmark
    std::size_t repetition = 0;   // single-run commands
    double validation_fraction = 0.2;
    std::vector<std::string> algorithms{"ERM", "SUPCON", "FOND\\FBA", "FOND\\FB", "FOND\\F", "FOND"};
    std::vector<std::string> settings{"Low", "High"};
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string out = "out";
    std::size_t jobs = 1;
    DatasetSection dataset;
    SplitSection split;
    NetworkConfig network;
    LossConfig loss;
    TrainerConfig trainer;  // trainer.seed is derived per run and not configurable
    SearchSection search;
    ProtocolSection protocol;
    std::string checkpoint;  // dump-embeddings input
};

RunConfig default_run_config();

// `include_runtime` adds `out` and `jobs`, which never influence results and
// are therefore left out of provenance records.
Json to_json(const RunConfig& cfg, bool include_runtime = true);
RunConfig from_json(const Json& doc);

// Applies one `dotted.key=value` override. The value is parsed as JSON when
// possible and taken as a plain string otherwise.
void apply_override(Json& doc, const std::string& assignment);

struct LoadOptions {
    std::optional<std::filesystem::path> config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> jobs;
};

RunConfig load_run_config(const LoadOptions& options);

// Semantic checks that do not need the dataset.
void validate(const RunConfig& cfg);

SplitRequest split_request(const SplitSection& split);
ExperimentSetup experiment_setup(const RunConfig& cfg);
ProtocolOptions protocol_options(const RunConfig& cfg);

}  // namespace fond::app
