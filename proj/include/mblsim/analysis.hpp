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

#include "mblsim/observables.hpp"

namespace mblsim {

struct Summary {
    double mean = 0.0;
    double sd = 0.0;
};

/// Time average over samples with t in [t_lo, t_hi], then mean and population
/// SD of those averages across realizations.
Summary quasi_steady_summary(const ObservableSeries& series, double t_lo, double t_hi);

struct LogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;  // standard error of the ensemble-mean slope
    std::size_t n_points = 0;
};

/// Least squares of the ensemble mean against ln t on [t_lo, t_hi] (t_lo > 0).
/// With several realizations the slope error is SD(per-realization slopes)/sqrt(k)
/// using the sample SD; a single realization falls back to the regression residuals.
LogFit logfit_entropy(const ObservableSeries& series, double t_lo, double t_hi);

}  // namespace mblsim
