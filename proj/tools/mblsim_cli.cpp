// Copyright 2026 The mblsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mblsim command-line front end.
//
//   mblsim list-experiments
//   mblsim validate <config.json>
//   mblsim run <config.json> [--seed N] [--workers N] [--out DIR]
//   mblsim summarize <run-dir>
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "mblsim/config.hpp"
#include "mblsim/experiments.hpp"
#include "mblsim/output.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
};

mblsim::ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
    auto config = mblsim::load_config(path);
    if (o.seed) config.seed = *o.seed;
    if (o.workers) config.workers = *o.workers;
    if (o.out) config.output_dir = *o.out;
    mblsim::validate(config);
    return config;
}

int list_experiments() {
    for (const auto& e : mblsim::experiment_catalog()) fmt::print("{:<20} {}\n", e.name, e.description);
    return 0;
}

int validate_config(const std::string& path) {
    const auto config = mblsim::load_config(path);
    fmt::print("{}: ok ({})\n", path, config.experiment);
    return 0;
}

int run(const std::string& path, const Overrides& o) {
    const auto config = load_with_overrides(path, o);
    const auto manifest = mblsim::run_experiment(config);
    fmt::print("{}", manifest.to_text());
    fmt::print("output: {}\n", manifest.directory.string());
    return 0;
}

int summarize(const std::string& dir) {
    const std::filesystem::path root(dir);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(root / "manifest.json"));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    const auto manifest = mblsim::RunManifest::from_json(doc);
    fmt::print("{}", manifest.to_text());

    bool intact = true;
    for (const auto& f : manifest.files) {
        std::string status = "ok";
        try {
            if (mblsim::sha256_hex(read_file(root / f.name)) != f.sha256) status = "CHECKSUM MISMATCH";
        } catch (const std::runtime_error&) {
            status = "MISSING";
        }
        if (status != "ok") intact = false;
        fmt::print("  [{}] {}\n", status, f.name);
    }
    for (const char* table : {"crossover.csv", "eth_distances.csv", "site_averaged_entropy.csv", "entropy_fits.csv"}) {
        if (std::filesystem::exists(root / table)) fmt::print("\n{}:\n{}", table, read_file(root / table));
    }
    if (!intact) {
        fmt::print(stderr, "error: run directory does not match its manifest\n");
        return kRuntimeError;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Disordered long-range XY spin-chain simulator"};
    app.require_subcommand(1);

    Overrides overrides;
    std::string config_path;
    std::string run_dir;

    app.add_subcommand("list-experiments", "List the experiment catalog");
    auto* validate_cmd = app.add_subcommand("validate", "Check a config file without running it");
    validate_cmd->add_option("config", config_path, "Config file (JSON)")->required();
    auto* run_cmd = app.add_subcommand("run", "Run an experiment and write its outputs");
    run_cmd->add_option("config", config_path, "Config file (JSON)")->required();
    run_cmd->add_option("--seed", overrides.seed, "Override the disorder seed");
    run_cmd->add_option("--workers", overrides.workers, "Worker threads");
    run_cmd->add_option("--out", overrides.out, "Output directory");
    auto* summarize_cmd = app.add_subcommand("summarize", "Verify checksums and print summaries of a run");
    summarize_cmd->add_option("run-dir", run_dir, "Run output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (app.got_subcommand("list-experiments")) return list_experiments();
        if (app.got_subcommand("validate")) return validate_config(config_path);
        if (app.got_subcommand("run")) return run(config_path, overrides);
        return summarize(run_dir);
    } catch (const mblsim::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kRuntimeError;
    }
}
