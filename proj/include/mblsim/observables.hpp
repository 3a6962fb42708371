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
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mblsim/evolve.hpp"

namespace mblsim {

/// Excited-state probability <n_i> per site.
struct SiteProbabilities {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

SiteProbabilities site_probabilities(const QuantumState& state);

/// (N_even - N_odd) / (N_even + N_odd) with 1-based site parity, so the
/// Neel state 0101... has imbalance +1. Throws std::domain_error on zero total.
double imbalance_neel(const SiteProbabilities& p);

/// (N_left - N_right) / (N_left + N_right) over the two halves of the chain.
double imbalance_domain(const SiteProbabilities& p);

/// Distance sqrt(sum_i (0.5 - P_i)^2) from the infinite-temperature occupations.
double delta_n(const SiteProbabilities& p);

/// Projection onto the m-excitation sector, renormalized. Input must be in the
/// full basis; the result stays in the full basis.
QuantumState post_select(const QuantumState& state, std::size_t excitations);

/// Precomputed index bookkeeping for repeated partial traces over one basis.
class PartialTracePlan {
public:
    /// `keep` holds 0-based sites; the first listed site is the most
    /// significant bit of the reduced index.
    PartialTracePlan(const SectorBasis& basis, std::span<const std::size_t> keep);

    Eigen::MatrixXcd operator()(const Eigen::VectorXcd& psi) const;
    Eigen::MatrixXcd operator()(const Eigen::MatrixXcd& rho) const;
    Eigen::MatrixXcd operator()(const QuantumState& state) const;

    std::size_t reduced_dim() const { return reduced_dim_; }

private:
    std::size_t basis_dim_;
    std::size_t reduced_dim_;
    std::size_t n_groups_ = 0;
    std::vector<std::size_t> keep_index_;   // basis index -> reduced index
    std::vector<std::size_t> group_index_;  // basis index -> traced-out pattern
    std::vector<std::vector<std::size_t>> groups_;
};

/// Reduced density matrix of `keep` (0-based sites). The first listed site is
/// the most significant bit of the reduced index.
Eigen::MatrixXcd partial_trace(const QuantumState& state, std::span<const std::size_t> keep);

/// Partial trace of a bare density matrix over `n_sites` qubits.
Eigen::MatrixXcd partial_trace(const Eigen::MatrixXcd& rho, std::size_t n_sites, std::span<const std::size_t> keep);

/// -tr(rho ln rho); eigenvalues below 1e-12 contribute nothing.
double von_neumann_entropy(const Eigen::MatrixXcd& rho);

/// Mean entropy over every n_choose-site subset of a 5-site (or any k-site) block.
double site_averaged_entropy(const Eigen::MatrixXcd& block_rho, std::size_t n_choose);

/// 0.5 * sum |eig(a - b)|.
double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// Time series with one row per realization. Statistics use the population
/// (divide-by-k) convention.
struct ObservableSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> realizations;  // [realization][time]
    std::vector<double> mean;
    std::vector<double> sd;

    std::size_t n_realizations() const { return realizations.size(); }
};

ObservableSeries ensemble_stats(std::vector<double> times, std::vector<std::vector<double>> values);

/// Multinomial sample of `n_shots` outcomes; only nonzero counts are returned.
std::map<std::uint32_t, std::uint64_t> sample_shots(std::span<const double> distribution, std::uint64_t n_shots,
                                                    std::uint64_t seed);

/// Computational-basis outcome probabilities over the 2^n bitstrings.
std::vector<double> outcome_distribution(const QuantumState& state);

/// Site probabilities estimated from shot counts.
SiteProbabilities probabilities_from_counts(const std::map<std::uint32_t, std::uint64_t>& counts, std::size_t n_sites);

}  // namespace mblsim
