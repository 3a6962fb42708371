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
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "mblsim/analysis.hpp"
#include "mblsim/config.hpp"
#include "mblsim/observables.hpp"
#include "mblsim/output.hpp"

namespace mblsim {

/// Runs fn(0..n-1) on up to `workers` threads. The first exception thrown by
/// any item is rethrown after all threads have joined.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

struct ImbalanceBound {
    double bound = 0.0;
    std::vector<ObservableSeries> probabilities;      // per site; post-selected when enabled
    std::vector<ObservableSeries> raw_probabilities;  // per site, before post-selection
    ObservableSeries imbalance;
    ObservableSeries delta_n;
    Summary imbalance_quasi_steady;
    Summary imbalance_final;
    /// delta-n of the window- and ensemble-averaged probabilities.
    double delta_n_quasi_steady = 0.0;
    /// delta-n of the ensemble-mean probabilities at the last sample.
    double delta_n_final = 0.0;
    /// Window average of the per-realization delta-n series.
    Summary delta_n_series_quasi_steady;
};

struct ImbalanceResult {
    std::vector<double> times;
    std::vector<ImbalanceBound> bounds;
};

/// imbalance-neel, imbalance-domain and post-selection.
ImbalanceResult compute_imbalance(const ExperimentConfig& config);

struct ReducedSnapshot {
    double time = 0.0;
    std::vector<std::size_t> sites;
    Eigen::MatrixXcd mean;         // ensemble-averaged reduced density matrix
    Eigen::MatrixXd abs_of_mean;   // |mean| element-wise
    Eigen::MatrixXd mean_of_abs;   // ensemble average of |rho| element-wise
    Eigen::MatrixXcd initial;      // reduced matrix of the initial product state
    double distance_thermal = 0.0; // trace distance to the maximally mixed matrix
    double distance_initial = 0.0;
};

struct EthBound {
    double bound = 0.0;
    std::vector<ReducedSnapshot> snapshots;  // time-major, then 1-qubit, 2-qubit, full subsystem
};

struct EthResult {
    std::vector<EthBound> closed;
    std::vector<EthBound> decoherent;  // filled for Lindblad evolution modes
};

EthResult compute_eth(const ExperimentConfig& config);

struct EntropyBound {
    double bound = 0.0;
    ObservableSeries half_chain;
    /// Entry N-1 holds the site-averaged entropy of N-site subsets at the last sample.
    std::vector<Summary> site_averaged;
    std::optional<LogFit> fit;  // set when the window starts after t = 0
};

struct EntropyResult {
    std::vector<double> times;
    std::vector<EntropyBound> closed;
    std::vector<EntropyBound> decoherent;  // filled for Lindblad evolution modes
};

EntropyResult compute_entropy(const ExperimentConfig& config);

struct ComparisonBound {
    double bound = 0.0;
    EntropyBound interacting;
    EntropyBound anderson;  // nearest-neighbour open chain, same disorder draws
    std::optional<EntropyBound> decoherent;
};

struct ComparisonResult {
    std::vector<double> times;
    std::vector<ComparisonBound> bounds;
};

ComparisonResult compute_entropy_comparison(const ExperimentConfig& config);

struct SwapCurve {
    double t_phi = 0.0;
    std::vector<std::size_t> sites;  // the first site starts excited
    std::vector<double> times;
    std::vector<std::vector<double>> probabilities;  // [site in group][time]
};

std::vector<SwapCurve> compute_dephasing_swap(const ExperimentConfig& config);

/// Output files and the structured results document of one experiment.
struct RunOutput {
    FileSet files;
    nlohmann::json results;
};

/// Runs the configured experiment in memory.
RunOutput render_experiment(const ExperimentConfig& config);

/// Runs the experiment and writes data files, config.json, manifest.json and
/// manifest.txt under `config.output_dir`.
RunManifest run_experiment(const ExperimentConfig& config);

}  // namespace mblsim
