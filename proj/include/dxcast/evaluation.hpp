#pragma once

#include "dxcast/factor_model.hpp"
#include "dxcast/transforms.hpp"
#include "dxcast/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dxcast {

enum class Transform { Clr, Cdf };
std::string to_string(Transform transform);
Transform transform_from_string(const std::string& text);
std::string to_string(const Selector& selector);

// One expanding-window split: how many leading years to train on and how far
// ahead it forecasts.
struct WindowSplit {
    Eigen::Index train_years = 0;
    int max_horizon = 0;
};

struct WindowPlan {
    int test_len = 0;
    std::vector<WindowSplit> splits;
    // Number of forecasts the plan yields at horizon h (= test_len + 1 - h).
    int forecast_count(int h) const;
};

// Split j trains on the first n - test_len + j - 1 years and forecasts
// horizons 1..test_len+1-j, so horizon h is hit test_len+1-h times.
WindowPlan make_window_plan(Eigen::Index n_years, int test_len = 20);

// Full chain: floor -> forward transform -> PCA -> per-score ETS forecasts
// -> reconstruct -> inverse transform.  Output curve j is the year
// last_year + j forecast; each sums to the panel radix.
std::vector<DeathCurve> run_pipeline(const Panel& panel, Transform transform,
                                     const Selector& selector, int horizon);

// Forecasts for every split of an expanding-window plan, each split refit
// from scratch on its own training years.
struct SplitForecasts {
    Eigen::Index train_years = 0;
    std::vector<DeathCurve> curves;  // horizons 1..max_horizon
};
std::vector<SplitForecasts> expanding_forecasts(const Panel& panel, Transform transform,
                                                const Selector& selector, const WindowPlan& plan);

// Symmetric Kullback-Leibler divergence, summed both directions over ages.
// Both densities are floored at 1e-12 and renormalized first.
double kld_sym(const Eigen::Ref<const Eigen::VectorXd>& p,
               const Eigen::Ref<const Eigen::VectorXd>& q);

// Jensen-Shannon divergence with the geometric-mean reference density;
// algebraically kld_sym / 4.
double jsd_geo(const Eigen::Ref<const Eigen::VectorXd>& p,
               const Eigen::Ref<const Eigen::VectorXd>& q);

// Age-summed divergences for one forecast/holdout pair.
struct DivergencePair {
    double kld = 0.0;
    double jsd = 0.0;
};

struct PointErrorRow {
    int h = 0;
    double kld = 0.0;
    double jsd = 0.0;
};

// Average the age-summed divergences at horizon h over its test_len+1-h
// windows, normalizing by n_ages * (test_len+1-h).
PointErrorRow aggregate_point_errors(const std::vector<DivergencePair>& pairs, int h,
                                     int test_len, Eigen::Index n_ages);

// Divergence rows for horizons 1..test_len from already-computed expanding
// forecasts (lets callers reuse one forecast pass for several metrics).
std::vector<PointErrorRow> point_rows_from_forecasts(const Panel& panel,
                                                     const std::vector<SplitForecasts>& forecasts,
                                                     int test_len);

// Expanding-window point-forecast backtest; one row per horizon 1..test_len.
std::vector<PointErrorRow> run_point_backtest(const Panel& panel, Transform transform,
                                              const Selector& selector, int test_len = 20);

// Deterministic Gompertz-plus-infant-hump fixture with the modal age of
// death drifting upward over the years.
Panel make_synthetic_panel(Eigen::Index n_years, double drift, std::uint64_t seed,
                           const std::string& country = "SYN", Sex sex = Sex::female);

}  // namespace dxcast
