#pragma once

// The tool's subcommands as library calls. Each writes its outputs under
// cfg.out and returns the list of written files plus a short summary.

#include "fond_app/config.hpp"

#include "fond/errors.hpp"
#include "fond/report.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fond::app {

struct CommandResult {
    std::vector<std::filesystem::path> outputs;
    std::string summary;
};

// Loads the configured dataset and fills network.input_dim / num_classes from
// it. Throws ConfigError if explicitly configured values disagree.
Dataset load_dataset(RunConfig& cfg);

// Fingerprint of every field of every sample (FNV-1a over the exact bits).
std::string dataset_fingerprint(const Dataset& data);

// {"tool","version","command","config","seeds","dataset_fingerprint"} on one line.
std::string provenance_json(const std::string& command, const RunConfig& cfg, const Json& seeds,
                            const std::string& fingerprint);

// Reads the provenance record embedded in any file written by this tool.
Json read_provenance(const std::filesystem::path& path);

struct BenchmarkRun {
    std::vector<RunRecord> records;
    std::vector<AggregateCell> cells;
    std::size_t num_classes = 0;
};

// Every (setting, algorithm, repetition) job in that order; repetitions of
// different algorithms share seeds. Deterministic for any cfg.jobs.
BenchmarkRun run_benchmark(RunConfig& cfg, const Dataset& data);

CommandResult cmd_generate(RunConfig cfg);
CommandResult cmd_split(RunConfig cfg);
CommandResult cmd_train(RunConfig cfg);
CommandResult cmd_search(RunConfig cfg);
CommandResult cmd_benchmark(RunConfig cfg);
CommandResult cmd_dump_embeddings(RunConfig cfg);

// Re-executes the command recorded in a file's provenance, writing to `out`.
CommandResult cmd_rerun(const std::filesystem::path& file, const std::string& out, std::size_t jobs);

// Process exit code for an error category: 2 config, 3 numerical, 4 I/O.
int exit_code_for(ErrorKind kind);

}  // namespace fond::app
