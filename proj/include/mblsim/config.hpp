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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mblsim/evolve.hpp"
#include "mblsim/model.hpp"

namespace mblsim {

/// Raised for any configuration problem; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentInfo {
    std::string name;
    std::string description;
};

const std::vector<ExperimentInfo>& experiment_catalog();

enum class InitialKind { neel, domain_wall, custom };

struct InitialStateSpec {
    InitialKind kind = InitialKind::neel;
    std::string bits;  // custom only

    /// Neel is 0101..., domain wall fills the left half.
    Config config(std::size_t n_sites) const;
};

enum class GridSpacing { linear, log };

/// A positive `start` is prepended with t = 0 since every grid begins at 0.
struct TimeGridSpec {
    double start = 0.0;
    double stop = 1.0;
    std::size_t n_points = 101;
    GridSpacing spacing = GridSpacing::linear;

    TimeGrid build() const;
};

enum class EvolutionMode { unitary_sector, lindblad_dense, lindblad_trajectory };

struct EvolutionSpec {
    EvolutionMode mode = EvolutionMode::unitary_sector;
    std::size_t n_traj = 500;
    double step_us = 1e-3;
};

struct ShotSpec {
    bool enabled = false;
    std::uint64_t n_shots = 3000;
};

struct ExperimentConfig {
    std::string experiment;
    InitialStateSpec initial_state;
    std::vector<double> disorder_bounds{0, 1, 2, 4, 6, 8, 10, 12};
    std::size_t n_realizations = 30;
    std::uint64_t seed = 1234;
    TimeGridSpec time_grid;
    EvolutionSpec evolution;
    std::vector<std::size_t> subsystem{2, 3, 4, 5, 6};  // 0-based; Q3..Q7
    ShotSpec shots;
    bool post_select = true;
    std::filesystem::path output_dir = "runs/out";
    DeviceParams device = DeviceParams::reference();
    std::vector<double> snapshot_times{0.0, 0.3, 1.0};
    double window_lo = 0.25;
    double window_hi = 1.0;
    std::vector<double> t_phi_sweep{30, 20, 10, 5};
    std::vector<std::vector<std::size_t>> swap_groups{{6, 7}, {7, 6, 8}};  // 0-based; first is excited
    std::size_t workers = 1;

    /// Canonical JSON form (1-based site labels), used for the run snapshot.
    nlohmann::json to_json() const;
};

/// Defaults tuned per experiment, before any user overrides.
ExperimentConfig default_config(const std::string& experiment);

/// Parses a config document; `base_dir` resolves a relative "device" file path.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError on the first violated constraint.
void validate(const ExperimentConfig& config);

std::string to_string(EvolutionMode mode);

}  // namespace mblsim
