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

#include "mblsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mblsim {

using nlohmann::json;

namespace {

void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

template <typename T>
T get_as(const json& doc, const char* key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

std::vector<std::size_t> sites_from_json(const json& v, const std::string& what) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "q3-q7") return {2, 3, 4, 5, 6};
        if (s == "q1-q5") return {0, 1, 2, 3, 4};
        throw ConfigError(what + ": unknown named subsystem '" + s + "' (expected q3-q7 or q1-q5)");
    }
    check(v.is_array(), what + " must be an array of 1-based site labels");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
        check(e.is_number_integer() && e.get<long long>() >= 1, what + " must hold 1-based site labels");
        out.push_back(static_cast<std::size_t>(e.get<long long>() - 1));
    }
    return out;
}

json sites_to_json(const std::vector<std::size_t>& sites) {
    json arr = json::array();
    for (auto s : sites) arr.push_back(s + 1);
    return arr;
}

EvolutionMode mode_from_string(const std::string& s) {
    if (s == "unitary-sector") return EvolutionMode::unitary_sector;
    if (s == "lindblad-dense") return EvolutionMode::lindblad_dense;
    if (s == "lindblad-trajectory") return EvolutionMode::lindblad_trajectory;
    throw ConfigError("unknown evolution mode '" + s + "'");
}

const std::set<std::string> kTopLevelKeys = {
    "experiment",      "initial_state", "disorder_bounds_mhz", "n_realizations", "seed",
    "time_grid",       "evolution",     "subsystem",           "shots",          "post_select",
    "output_dir",      "device",        "delta_mhz",           "t_phi_us",       "snapshot_times_us",
    "quasi_steady_window_us", "t_phi_sweep_us", "swap_groups",  "workers"};

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
    static const std::vector<ExperimentInfo> catalog = {
        {"coupling-matrix", "coupling matrix J_ij and inherent fields h_i derived from the device parameters"},
        {"imbalance-neel", "site probabilities, Neel imbalance and delta-n versus disorder strength"},
        {"imbalance-domain", "site probabilities, domain-wall imbalance and delta-n versus disorder strength"},
        {"eth-matrices", "ensemble-averaged 1-, 2- and 5-qubit reduced density matrices at snapshot times"},
        {"entropy", "half-chain entanglement entropy series and site-averaged entropy versus subsystem size"},
        {"entropy-comparison", "half-chain entropy of the long-range model against the nearest-neighbour free-fermion baseline"},
        {"dephasing-swap", "damped energy swaps in small qubit groups for a sweep of pure dephasing times"},
        {"post-selection", "site probabilities with and without excitation-number post-selection under decoherence"},
    };
    return catalog;
}

Config InitialStateSpec::config(std::size_t n_sites) const {
    switch (kind) {
        case InitialKind::neel: {
            Config c = 0;
            for (std::size_t i = 1; i < n_sites; i += 2) c |= site_mask(n_sites, i);
            return c;
        }
        case InitialKind::domain_wall: {
            Config c = 0;
            for (std::size_t i = 0; i < n_sites / 2; ++i) c |= site_mask(n_sites, i);
            return c;
        }
        case InitialKind::custom:
            check(bits.size() == n_sites, "initial bitstring length must equal the number of sites");
            return parse_bitstring(bits);
    }
    throw ConfigError("unknown initial state kind");
}

TimeGrid TimeGridSpec::build() const {
    check(n_points >= 2, "time grid needs at least 2 points");
    check(std::isfinite(start) && std::isfinite(stop) && start >= 0.0 && stop > start,
          "time grid needs 0 <= start < stop");
    if (spacing == GridSpacing::log) {
        check(start > 0.0, "log-spaced time grid needs start > 0");
        return TimeGrid::logarithmic(start, stop, n_points);
    }
    if (start == 0.0) return TimeGrid::linear(stop, n_points);
    std::vector<double> t{0.0};
    for (std::size_t i = 0; i < n_points; ++i) {
        t.push_back(start + (stop - start) * static_cast<double>(i) / static_cast<double>(n_points - 1));
    }
    return TimeGrid(std::move(t));
}

std::string to_string(EvolutionMode mode) {
    switch (mode) {
        case EvolutionMode::unitary_sector: return "unitary-sector";
        case EvolutionMode::lindblad_dense: return "lindblad-dense";
        case EvolutionMode::lindblad_trajectory: return "lindblad-trajectory";
    }
    return "unknown";
}

json ExperimentConfig::to_json() const {
    json j;
    j["experiment"] = experiment;
    switch (initial_state.kind) {
        case InitialKind::neel: j["initial_state"] = "neel"; break;
        case InitialKind::domain_wall: j["initial_state"] = "domain-wall"; break;
        case InitialKind::custom: j["initial_state"] = initial_state.bits; break;
    }
    j["disorder_bounds_mhz"] = disorder_bounds;
    j["n_realizations"] = n_realizations;
    j["seed"] = seed;
    j["time_grid"] = {{"start", time_grid.start},
                      {"stop", time_grid.stop},
                      {"n_points", time_grid.n_points},
                      {"spacing", time_grid.spacing == GridSpacing::log ? "log" : "linear"}};
    j["evolution"] = {{"mode", to_string(evolution.mode)}, {"n_traj", evolution.n_traj}, {"step_us", evolution.step_us}};
    j["subsystem"] = sites_to_json(subsystem);
    j["shots"] = {{"enabled", shots.enabled}, {"n_shots", shots.n_shots}};
    j["post_select"] = post_select;
    j["output_dir"] = output_dir.string();
    j["device"] = {{"g", device.g},   {"lambda_c", device.lambda_c}, {"delta", device.delta},
                   {"t1", device.t1}, {"t_phi", device.t_phi}};
    j["snapshot_times_us"] = snapshot_times;
    j["quasi_steady_window_us"] = {window_lo, window_hi};
    j["t_phi_sweep_us"] = t_phi_sweep;
    json groups = json::array();
    for (const auto& g : swap_groups) groups.push_back(sites_to_json(g));
    j["swap_groups"] = groups;
    j["workers"] = workers;
    return j;
}

ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig c;
    c.experiment = experiment;
    if (experiment == "imbalance-domain") {
        c.initial_state.kind = InitialKind::domain_wall;
    } else if (experiment == "eth-matrices") {
        c.disorder_bounds = {0, 12};
    } else if (experiment == "entropy-comparison") {
        c.disorder_bounds = {12};
        c.time_grid = {0.01, 1.0, 30, GridSpacing::log};
    } else if (experiment == "post-selection") {
        c.disorder_bounds = {0, 12};
        c.evolution.mode = EvolutionMode::lindblad_trajectory;
    } else if (experiment == "dephasing-swap") {
        c.disorder_bounds = {0};
        c.n_realizations = 1;
        c.time_grid.n_points = 201;
    }
    return c;
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
    check(doc.is_object(), "config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        check(kTopLevelKeys.count(key) == 1, "unknown config key '" + key + "'");
    }
    check(doc.contains("experiment") && doc["experiment"].is_string(), "config needs an 'experiment' string");
    ExperimentConfig c = default_config(doc["experiment"].get<std::string>());

    if (doc.contains("device")) {
        try {
            if (doc["device"].is_string()) {
                std::filesystem::path p = doc["device"].get<std::string>();
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                c.device = load_device_params(p);
            } else {
                c.device = device_params_from_json(doc["device"].dump());
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (doc.contains("delta_mhz")) c.device.delta = get_as<double>(doc, "delta_mhz");
    if (doc.contains("t_phi_us")) c.device.t_phi.assign(c.device.n_sites, get_as<double>(doc, "t_phi_us"));

    if (doc.contains("initial_state")) {
        const auto s = get_as<std::string>(doc, "initial_state");
        if (s == "neel") {
            c.initial_state = {InitialKind::neel, {}};
        } else if (s == "domain-wall") {
            c.initial_state = {InitialKind::domain_wall, {}};
        } else {
            c.initial_state = {InitialKind::custom, s};
        }
    }
    if (doc.contains("disorder_bounds_mhz")) c.disorder_bounds = get_as<std::vector<double>>(doc, "disorder_bounds_mhz");
    if (doc.contains("n_realizations")) c.n_realizations = get_as<std::size_t>(doc, "n_realizations");
    if (doc.contains("seed")) c.seed = get_as<std::uint64_t>(doc, "seed");
    if (doc.contains("time_grid")) {
        const json& g = doc["time_grid"];
        check(g.is_object(), "time_grid must be an object");
        if (g.contains("start")) c.time_grid.start = get_as<double>(g, "start");
        if (g.contains("stop")) c.time_grid.stop = get_as<double>(g, "stop");
        if (g.contains("n_points")) c.time_grid.n_points = get_as<std::size_t>(g, "n_points");
        if (g.contains("spacing")) {
            const auto s = get_as<std::string>(g, "spacing");
            check(s == "linear" || s == "log", "time_grid.spacing must be 'linear' or 'log'");
            c.time_grid.spacing = s == "log" ? GridSpacing::log : GridSpacing::linear;
        }
    }
    if (doc.contains("evolution")) {
        const json& e = doc["evolution"];
        check(e.is_object(), "evolution must be an object");
        if (e.contains("mode")) c.evolution.mode = mode_from_string(get_as<std::string>(e, "mode"));
        if (e.contains("n_traj")) c.evolution.n_traj = get_as<std::size_t>(e, "n_traj");
        if (e.contains("step_us")) c.evolution.step_us = get_as<double>(e, "step_us");
        if (e.contains("basis")) {
            const auto b = get_as<std::string>(e, "basis");
            check(b == "sector" || b == "full", "evolution.basis must be 'sector' or 'full'");
            const bool lindblad = c.evolution.mode != EvolutionMode::unitary_sector;
            check(!(lindblad && b == "sector"),
                  "Lindblad evolution with relaxation leaves the excitation sector; use the full basis");
        }
    }
    if (doc.contains("subsystem")) c.subsystem = sites_from_json(doc["subsystem"], "subsystem");
    if (doc.contains("shots")) {
        const json& s = doc["shots"];
        check(s.is_object(), "shots must be an object");
        if (s.contains("enabled")) c.shots.enabled = get_as<bool>(s, "enabled");
        if (s.contains("n_shots")) c.shots.n_shots = get_as<std::uint64_t>(s, "n_shots");
    }
    if (doc.contains("post_select")) c.post_select = get_as<bool>(doc, "post_select");
    if (doc.contains("output_dir")) c.output_dir = get_as<std::string>(doc, "output_dir");
    if (doc.contains("snapshot_times_us")) c.snapshot_times = get_as<std::vector<double>>(doc, "snapshot_times_us");
    if (doc.contains("quasi_steady_window_us")) {
        const auto w = get_as<std::vector<double>>(doc, "quasi_steady_window_us");
        check(w.size() == 2, "quasi_steady_window_us must be [lo, hi]");
        c.window_lo = w[0];
        c.window_hi = w[1];
    }
    if (doc.contains("t_phi_sweep_us")) c.t_phi_sweep = get_as<std::vector<double>>(doc, "t_phi_sweep_us");
    if (doc.contains("swap_groups")) {
        check(doc["swap_groups"].is_array(), "swap_groups must be an array of site lists");
        c.swap_groups.clear();
        for (const auto& g : doc["swap_groups"]) c.swap_groups.push_back(sites_from_json(g, "swap_groups entry"));
    }
    if (doc.contains("workers")) c.workers = get_as<std::size_t>(doc, "workers");
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(doc, path.parent_path());
}

void validate(const ExperimentConfig& c) {
    const auto& cat = experiment_catalog();
    check(std::any_of(cat.begin(), cat.end(), [&](const ExperimentInfo& e) { return e.name == c.experiment; }),
          "unknown experiment '" + c.experiment + "'");
    try {
        c.device.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const std::size_t n = c.device.n_sites;
    try {
        (void)c.initial_state.config(n);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    check(!c.disorder_bounds.empty(), "disorder_bounds_mhz must not be empty");
    for (double b : c.disorder_bounds) check(std::isfinite(b) && b >= 0.0, "disorder bounds must be finite and >= 0");
    check(c.n_realizations >= 1, "n_realizations must be >= 1");
    const TimeGrid grid = c.time_grid.build();
    check(c.evolution.n_traj >= 1, "evolution.n_traj must be >= 1");
    check(c.evolution.step_us > 0.0 && std::isfinite(c.evolution.step_us), "evolution.step_us must be positive");

    check(!c.subsystem.empty(), "subsystem must not be empty");
    std::set<std::size_t> seen;
    for (auto s : c.subsystem) {
        check(s < n, "subsystem site out of range");
        check(seen.insert(s).second, "subsystem sites must be distinct");
    }
    check(!c.shots.enabled || c.shots.n_shots >= 1, "shots.n_shots must be >= 1 when shot sampling is enabled");
    for (std::size_t i = 0; i < c.snapshot_times.size(); ++i) {
        check(c.snapshot_times[i] >= 0.0 && std::isfinite(c.snapshot_times[i]), "snapshot times must be >= 0");
        check(i == 0 || c.snapshot_times[i] > c.snapshot_times[i - 1], "snapshot times must be increasing");
    }
    check(c.window_lo >= 0.0 && c.window_hi >= c.window_lo, "quasi-steady window must satisfy 0 <= lo <= hi");
    check(c.window_hi <= grid.times().back() + 1e-12, "quasi-steady window extends past the time grid");
    if (c.experiment == "entropy-comparison") check(c.window_lo > 0.0, "log fit window must start after t = 0");
    if (c.experiment == "eth-matrices") {
        check(!c.snapshot_times.empty(), "eth-matrices needs snapshot_times_us");
        check(c.subsystem.size() >= 2, "eth-matrices needs a subsystem of at least 2 sites");
    }
    if (c.experiment == "post-selection") {
        check(c.evolution.mode != EvolutionMode::unitary_sector, "post-selection needs a Lindblad evolution mode");
    }
    for (double t : c.t_phi_sweep) check(t > 0.0, "t_phi_sweep_us entries must be positive");
    for (const auto& g : c.swap_groups) {
        check(g.size() >= 2, "swap groups need at least 2 sites");
        std::set<std::size_t> gs;
        for (auto s : g) {
            check(s < n, "swap group site out of range");
            check(gs.insert(s).second, "swap group sites must be distinct");
        }
    }
    check(c.workers >= 1, "workers must be >= 1");
}

}  // namespace mblsim
