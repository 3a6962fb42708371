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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mblsim {

// Frequencies are cyclic (f = omega / 2pi) in MHz, times in microseconds.
// Sites are 0-based in the API; site 0 is the leftmost character of a printed
// bitstring and the most significant bit of a configuration integer.

using Config = std::uint32_t;

/// Bit mask of `site` in an `n_sites` configuration integer.
constexpr Config site_mask(std::size_t n_sites, std::size_t site) {
    return Config{1} << (n_sites - 1 - site);
}

constexpr bool occupied(Config c, std::size_t n_sites, std::size_t site) {
    return (c & site_mask(n_sites, site)) != 0;
}

/// Parses "0101010101" (site 0 first). Throws std::invalid_argument on bad characters.
Config parse_bitstring(const std::string& bits);
std::string format_bitstring(Config c, std::size_t n_sites);

/// Measured chip constants. `lambda_c[i]` couples site i to site (i + 1) mod n.
struct DeviceParams {
    std::size_t n_sites = 10;
    std::vector<double> g;         // qubit-resonator coupling, MHz
    std::vector<double> lambda_c;  // nearest-neighbour crosstalk ring, MHz
    double delta = -650.0;         // common detuning, MHz
    std::vector<double> t1;        // energy lifetime, us
    std::vector<double> t_phi;     // pure dephasing time, us

    /// The 10-qubit processor operated at -650 MHz detuning, T_phi = 30 us.
    static DeviceParams reference();

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

/// Reads a JSON document with any subset of the DeviceParams keys
/// ("g", "lambda_c", "delta", "t1", "t_phi"); missing keys keep reference values.
DeviceParams load_device_params(const std::filesystem::path& path);
DeviceParams device_params_from_json(const std::string& text);

struct DisorderSpec {
    double bound = 0.0;  // half-width of the uniform distribution, MHz
    std::size_t n_realizations = 30;
    std::uint64_t seed = 1234;

    void validate() const;
};

struct SpinModel {
    Eigen::MatrixXd J;   // symmetric, zero diagonal, MHz
    Eigen::VectorXd h;   // inherent fields, MHz
    Eigen::VectorXd dh;  // disorder offsets, MHz

    std::size_t n_sites() const { return static_cast<std::size_t>(h.size()); }

    /// Copy with `dh` replaced.
    SpinModel with_disorder(std::span<const double> offsets) const;

    /// Model on the listed sites only, in the listed order.
    SpinModel subsystem(std::span<const std::size_t> sites) const;
};

/// Sector bases carry a fixed excitation count; the full basis holds all 2^n states.
class SectorBasis {
public:
    static SectorBasis sector(std::size_t n_sites, std::size_t excitations);
    static SectorBasis full(std::size_t n_sites);

    std::size_t n_sites() const { return n_sites_; }
    std::size_t dim() const { return states_.size(); }
    bool is_full() const { return !excitations_.has_value(); }
    std::optional<std::size_t> excitations() const { return excitations_; }
    const std::vector<Config>& states() const { return states_; }
    Config state(std::size_t index) const { return states_[index]; }

    /// Position of `c` in the basis, or std::nullopt if it is not a member.
    std::optional<std::size_t> index_of(Config c) const;

    friend bool operator==(const SectorBasis& a, const SectorBasis& b) {
        return a.n_sites_ == b.n_sites_ && a.excitations_ == b.excitations_;
    }

private:
    SectorBasis(std::size_t n_sites, std::optional<std::size_t> excitations);

    std::size_t n_sites_;
    std::optional<std::size_t> excitations_;
    std::vector<Config> states_;
    std::vector<std::int32_t> lookup_;  // 2^n entries, -1 for non-members
};

using BasisPtr = std::shared_ptr<const SectorBasis>;

/// Shorthand for std::make_shared over the two basis factories.
BasisPtr make_sector_basis(std::size_t n_sites, std::size_t excitations);
BasisPtr make_full_basis(std::size_t n_sites);

struct HamiltonianMatrix {
    BasisPtr basis;
    Eigen::MatrixXcd entries;  // MHz

    /// Compressed copy for the full-basis master-equation right-hand side.
    Eigen::SparseMatrix<std::complex<double>> sparse() const;
};

/// J_ij = lambda_c on ring neighbours + g_i g_j / delta; h_i = g_i^2 / delta.
SpinModel derive_couplings(const DeviceParams& params);

/// Offsets for realization `k` (1-based). Depends only on (seed, k, site) and
/// scales linearly with the bound, so realizations are paired across bounds.
std::vector<double> sample_disorder(const DisorderSpec& spec, std::size_t k, std::size_t n_sites);

HamiltonianMatrix build_hamiltonian(const SpinModel& model, const BasisPtr& basis);

/// Sparse assembly of the same matrix, skipping the dense intermediate.
Eigen::SparseMatrix<std::complex<double>> build_hamiltonian_sparse(const SpinModel& model,
                                                                   const SectorBasis& basis);

enum class ChainBoundary { ring, open };

/// Zeroes every coupling beyond nearest neighbours. With ChainBoundary::ring the
/// (n-1, 0) pair counts as a neighbour; with ChainBoundary::open it is cleared too.
SpinModel restrict_nearest_neighbor(const SpinModel& model, ChainBoundary boundary = ChainBoundary::ring);

}  // namespace mblsim
