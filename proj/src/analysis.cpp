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

#include "mblsim/analysis.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mblsim {

namespace {

constexpr double kTimeSlack = 1e-12;

std::vector<std::size_t> window_indices(const std::vector<double>& times, double t_lo, double t_hi) {
    if (!(t_hi >= t_lo)) throw std::invalid_argument("window must satisfy t_lo <= t_hi");
    if (times.empty() || t_lo < times.front() - kTimeSlack || t_hi > times.back() + kTimeSlack) {
        throw std::invalid_argument("window lies outside the time grid");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] >= t_lo - kTimeSlack && times[i] <= t_hi + kTimeSlack) idx.push_back(i);
    }
    if (idx.empty()) throw std::invalid_argument("window contains no grid samples");
    return idx;
}

struct Line {
    double slope;
    double intercept;
    double residual_ss;
    double sxx;
};

Line fit(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (intercept + slope * x[i]);
        ss += r * r;
    }
    return {slope, intercept, ss, sxx};
}

}  // namespace

Summary quasi_steady_summary(const ObservableSeries& series, double t_lo, double t_hi) {
    const auto idx = window_indices(series.times, t_lo, t_hi);
    if (series.realizations.empty()) throw std::invalid_argument("series has no realizations");
    std::vector<double> averages;
    for (const auto& row : series.realizations) {
        double s = 0.0;
        for (auto i : idx) s += row[i];
        averages.push_back(s / static_cast<double>(idx.size()));
    }
    const auto k = static_cast<double>(averages.size());
    Summary out;
    for (double a : averages) out.mean += a;
    out.mean /= k;
    for (double a : averages) out.sd += (a - out.mean) * (a - out.mean);
    out.sd = std::sqrt(out.sd / k);
    return out;
}

LogFit logfit_entropy(const ObservableSeries& series, double t_lo, double t_hi) {
    if (!(t_lo > 0.0)) throw std::invalid_argument("log fit window must start at t > 0");
    const auto idx = window_indices(series.times, t_lo, t_hi);
    if (idx.size() < 3) throw std::invalid_argument("log fit needs at least 3 points in the window");

    std::vector<double> x;
    std::vector<double> y;
    for (auto i : idx) {
        x.push_back(std::log(series.times[i]));
        y.push_back(series.mean[i]);
    }
    const Line mean_fit = fit(x, y);
    LogFit out{mean_fit.slope, mean_fit.intercept, 0.0, idx.size()};

    const std::size_t k = series.realizations.size();
    if (k >= 2) {
        std::vector<double> slopes;
        for (const auto& row : series.realizations) {
            std::vector<double> yr;
            for (auto i : idx) yr.push_back(row[i]);
            slopes.push_back(fit(x, yr).slope);
        }
        double m = 0.0;
        for (double s : slopes) m += s;
        m /= static_cast<double>(k);
        double var = 0.0;
        for (double s : slopes) var += (s - m) * (s - m);
        out.slope_se = std::sqrt(var / static_cast<double>(k - 1) / static_cast<double>(k));
    } else if (idx.size() > 2) {
        out.slope_se = std::sqrt(mean_fit.residual_ss / static_cast<double>(idx.size() - 2) / mean_fit.sxx);
    }
    return out;
}

}  // namespace mblsim
