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

#include "mblsim/observables.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <Eigen/Eigenvalues>

namespace mblsim {

namespace {

using cplx = std::complex<double>;

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

double population_ratio(double a, double b) {
    const double total = a + b;
    if (!(total > 0.0)) throw std::domain_error("imbalance undefined: no excitations");
    return (a - b) / total;
}

std::size_t qubit_count(Eigen::Index dim) {
    require(dim > 0 && std::has_single_bit(static_cast<std::size_t>(dim)), "matrix dimension is not a power of 2");
    return static_cast<std::size_t>(std::countr_zero(static_cast<std::size_t>(dim)));
}

void check_hermitian(const Eigen::MatrixXcd& rho) {
    require(rho.rows() == rho.cols(), "density matrix must be square");
    if (rho.size() == 0) return;
    const double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
    require((rho - rho.adjoint()).cwiseAbs().maxCoeff() <= 1e-10 * scale, "density matrix is not Hermitian");
}

Config mask_of(std::size_t n, std::span<const std::size_t> keep) {
    require(!keep.empty(), "partial trace needs at least one kept site");
    Config mask = 0;
    for (std::size_t s : keep) {
        require(s < n, "kept site out of range");
        require((mask & site_mask(n, s)) == 0, "kept sites must be distinct");
        mask |= site_mask(n, s);
    }
    return mask;
}

}  // namespace

SiteProbabilities site_probabilities(const QuantumState& state) {
    const SectorBasis& basis = *state.basis();
    const std::size_t n = basis.n_sites();
    std::vector<double> weight(basis.dim());
    if (state.is_pure()) {
        for (std::size_t a = 0; a < basis.dim(); ++a) weight[a] = std::norm(state.vector()(static_cast<Eigen::Index>(a)));
    } else {
        for (std::size_t a = 0; a < basis.dim(); ++a) {
            weight[a] = state.matrix()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)).real();
        }
    }
    SiteProbabilities p{std::vector<double>(n, 0.0)};
    for (std::size_t a = 0; a < basis.dim(); ++a) {
        const Config c = basis.state(a);
        for (std::size_t i = 0; i < n; ++i) {
            if (occupied(c, n, i)) p.values[i] += weight[a];
        }
    }
    for (auto& v : p.values) v = std::clamp(v, 0.0, 1.0);
    return p;
}

double imbalance_neel(const SiteProbabilities& p) {
    double even = 0.0;
    double odd = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) ((i % 2 == 1) ? even : odd) += p[i];
    return population_ratio(even, odd);
}

double imbalance_domain(const SiteProbabilities& p) {
    double left = 0.0;
    double right = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) ((i < p.size() / 2) ? left : right) += p[i];
    return population_ratio(left, right);
}

double delta_n(const SiteProbabilities& p) {
    double sum = 0.0;
    for (double v : p.values) sum += (0.5 - v) * (0.5 - v);
    return std::sqrt(sum);
}

QuantumState post_select(const QuantumState& state, std::size_t excitations) {
    const SectorBasis& basis = *state.basis();
    require(basis.is_full(), "post-selection needs a full-basis state");
    require(excitations <= basis.n_sites(), "excitation count out of range");
    const auto D = static_cast<Eigen::Index>(basis.dim());
    Eigen::VectorXd keep(D);
    for (Eigen::Index a = 0; a < D; ++a) {
        keep(a) = static_cast<std::size_t>(std::popcount(basis.state(static_cast<std::size_t>(a)))) == excitations;
    }
    if (state.is_pure()) {
        Eigen::VectorXcd v = state.vector().cwiseProduct(keep.cast<cplx>());
        const double w = v.squaredNorm();
        if (!(w > 1e-14)) throw std::domain_error("state has no weight in the requested sector");
        return QuantumState::pure(state.basis(), v / std::sqrt(w));
    }
    Eigen::MatrixXcd rho = keep.cast<cplx>().asDiagonal() * state.matrix() * keep.cast<cplx>().asDiagonal();
    const double w = rho.trace().real();
    if (!(w > 1e-14)) throw std::domain_error("state has no weight in the requested sector");
    return QuantumState::density(state.basis(), rho / w);
}

PartialTracePlan::PartialTracePlan(const SectorBasis& basis, std::span<const std::size_t> keep)
    : basis_dim_(basis.dim()), reduced_dim_(std::size_t{1} << keep.size()) {
    const std::size_t n = basis.n_sites();
    const Config keep_mask = mask_of(n, keep);
    std::unordered_map<Config, std::size_t> group_of_rest;
    keep_index_.resize(basis_dim_);
    group_index_.resize(basis_dim_);
    for (std::size_t i = 0; i < basis_dim_; ++i) {
        const Config c = basis.state(i);
        std::size_t idx = 0;
        for (std::size_t s : keep) idx = (idx << 1) | static_cast<std::size_t>(occupied(c, n, s));
        keep_index_[i] = idx;
        auto [it, inserted] = group_of_rest.try_emplace(c & ~keep_mask, groups_.size());
        if (inserted) groups_.emplace_back();
        groups_[it->second].push_back(i);
        group_index_[i] = it->second;
    }
    n_groups_ = groups_.size();
}

Eigen::MatrixXcd PartialTracePlan::operator()(const Eigen::VectorXcd& psi) const {
    require(static_cast<std::size_t>(psi.size()) == basis_dim_, "state size does not match the partial-trace basis");
    // rho_A = M M^+ with M[kept pattern, traced pattern] = psi.
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(reduced_dim_), static_cast<Eigen::Index>(n_groups_));
    for (std::size_t i = 0; i < basis_dim_; ++i) {
        m(static_cast<Eigen::Index>(keep_index_[i]), static_cast<Eigen::Index>(group_index_[i])) = psi(static_cast<Eigen::Index>(i));
    }
    return m * m.adjoint();
}

Eigen::MatrixXcd PartialTracePlan::operator()(const Eigen::MatrixXcd& rho) const {
    require(static_cast<std::size_t>(rho.rows()) == basis_dim_ && rho.rows() == rho.cols(),
            "matrix shape does not match the partial-trace basis");
    const auto k = static_cast<Eigen::Index>(reduced_dim_);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(k, k);
    for (const auto& members : groups_) {
        for (std::size_t i : members) {
            for (std::size_t j : members) {
                out(static_cast<Eigen::Index>(keep_index_[i]), static_cast<Eigen::Index>(keep_index_[j])) +=
                    rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
        }
    }
    return out;
}

Eigen::MatrixXcd PartialTracePlan::operator()(const QuantumState& state) const {
    return state.is_pure() ? (*this)(state.vector()) : (*this)(state.matrix());
}

Eigen::MatrixXcd partial_trace(const QuantumState& state, std::span<const std::size_t> keep) {
    return PartialTracePlan(*state.basis(), keep)(state);
}

Eigen::MatrixXcd partial_trace(const Eigen::MatrixXcd& rho, std::size_t n_sites, std::span<const std::size_t> keep) {
    require(rho.rows() == rho.cols() && qubit_count(rho.rows()) == n_sites, "matrix dimension must be 2^n_sites");
    return PartialTracePlan(SectorBasis::full(n_sites), keep)(rho);
}

double von_neumann_entropy(const Eigen::MatrixXcd& rho) {
    check_hermitian(rho);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double lambda = es.eigenvalues()(i);
        if (lambda > 1e-12) s -= lambda * std::log(lambda);
    }
    return std::max(s, 0.0);
}

double site_averaged_entropy(const Eigen::MatrixXcd& block_rho, std::size_t n_choose) {
    const std::size_t k = qubit_count(block_rho.rows());
    require(n_choose >= 1 && n_choose <= k, "subset size out of range");
    // Walk all k-bit masks with n_choose bits set.
    double total = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> subset;
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != n_choose) continue;
        subset.clear();
        for (std::size_t s = 0; s < k; ++s) {
            if (mask & (1u << s)) subset.push_back(s);
        }
        total += von_neumann_entropy(partial_trace(block_rho, k, subset));
        ++count;
    }
    return total / static_cast<double>(count);
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "trace distance needs equal shapes");
    const Eigen::MatrixXcd d = a - b;
    check_hermitian(d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

ObservableSeries ensemble_stats(std::vector<double> times, std::vector<std::vector<double>> values) {
    require(!values.empty(), "ensemble needs at least one realization");
    for (const auto& row : values) require(row.size() == times.size(), "realization length does not match the grid");
    ObservableSeries s{std::move(times), std::move(values), {}, {}};
    const std::size_t T = s.times.size();
    const auto k = static_cast<double>(s.realizations.size());
    s.mean.assign(T, 0.0);
    s.sd.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        double mean = 0.0;
        for (const auto& row : s.realizations) mean += row[t];
        mean /= k;
        double var = 0.0;
        for (const auto& row : s.realizations) var += (row[t] - mean) * (row[t] - mean);
        s.mean[t] = mean;
        s.sd[t] = std::sqrt(var / k);
    }
    return s;
}

std::map<std::uint32_t, std::uint64_t> sample_shots(std::span<const double> distribution, std::uint64_t n_shots,
                                                    std::uint64_t seed) {
    require(!distribution.empty(), "empty outcome distribution");
    double total = 0.0;
    for (double p : distribution) {
        require(std::isfinite(p) && p >= -1e-12, "outcome probabilities must be non-negative");
        total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, "outcome probabilities must sum to 1");
    std::map<std::uint32_t, std::uint64_t> counts;
    if (n_shots == 0) return counts;
    std::vector<double> weights(distribution.begin(), distribution.end());
    for (auto& w : weights) w = std::max(w, 0.0);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 rng(seq);
    std::discrete_distribution<std::uint32_t> pick(weights.begin(), weights.end());
    for (std::uint64_t s = 0; s < n_shots; ++s) ++counts[pick(rng)];
    return counts;
}

std::vector<double> outcome_distribution(const QuantumState& state) {
    const SectorBasis& basis = *state.basis();
    std::vector<double> p(std::size_t{1} << basis.n_sites(), 0.0);
    for (std::size_t a = 0; a < basis.dim(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        p[basis.state(a)] = state.is_pure() ? std::norm(state.vector()(i)) : std::max(state.matrix()(i, i).real(), 0.0);
    }
    return p;
}

SiteProbabilities probabilities_from_counts(const std::map<std::uint32_t, std::uint64_t>& counts, std::size_t n_sites) {
    SiteProbabilities p{std::vector<double>(n_sites, 0.0)};
    std::uint64_t total = 0;
    for (const auto& [outcome, count] : counts) {
        total += count;
        for (std::size_t i = 0; i < n_sites; ++i) {
            if (occupied(outcome, n_sites, i)) p.values[i] += static_cast<double>(count);
        }
    }
    require(total > 0, "no shots recorded");
    for (auto& v : p.values) v /= static_cast<double>(total);
    return p;
}

}  // namespace mblsim
