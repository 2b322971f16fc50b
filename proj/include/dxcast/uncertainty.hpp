#pragma once

#include "dxcast/evaluation.hpp"
#include "dxcast/types.hpp"

#include <vector>

namespace dxcast {

// h-step-ahead forecast errors (actual minus forecast, radix scale) from the
// nested validation block, one row per validation window.
struct ResidualSet {
    int horizon = 0;
    Eigen::MatrixXd residuals;  // windows x ages
    Eigen::VectorXd gamma;      // per-age sample standard deviation
};

// Nested expanding-window residuals inside a training panel: the last
// val_len years serve as the validation block.  Horizons run 1..val_len-1
// so every set has at least two rows.
std::vector<ResidualSet> validation_residuals(const Panel& training_panel, Transform transform,
                                              const Selector& selector, int val_len = 20);

// Per-age sample standard deviation (divisor n-1) of residual rows.
Eigen::VectorXd pointwise_sd(const Eigen::Ref<const Eigen::MatrixXd>& residual_rows);

struct ThetaCalibration {
    double alpha = 0.0;         // significance level
    double theta = 0.0;         // chosen multiplier
    double achieved_ecp = 0.0;  // validation coverage at theta
    bool grid_cap_hit = false;  // theta landed on the top of the grid
};

// Grid-search theta in {0.00, 0.01, ..., 30.00} for empirical coverage of
// |residual| <= theta * gamma closest to 1 - alpha; ties -> smallest theta.
ThetaCalibration calibrate_theta(const Eigen::Ref<const Eigen::MatrixXd>& residuals,
                                 const Eigen::Ref<const Eigen::VectorXd>& gamma, double alpha);

struct IntervalForecast {
    Eigen::VectorXd lb, ub;
    int horizon = 0;
    double nominal = 0.0;  // 1 - alpha
};

// [max(0, point - theta*gamma), point + theta*gamma] around a point forecast.
IntervalForecast build_interval(const DeathCurve& point_forecast,
                                const Eigen::Ref<const Eigen::VectorXd>& gamma, double theta,
                                int horizon, double alpha);

// Empirical coverage probability over the test_len+1-h interval/holdout
// pairs at horizon h: 1 - (#outside) / (n_ages * n_pairs).
double ecp(const std::vector<IntervalForecast>& intervals, const std::vector<DeathCurve>& holdouts,
           int h, int test_len = 20);

// |ecp - (1 - alpha)|.
double cpd(double ecp_value, double alpha);

// Interval width plus (2/alpha)-scaled penalties for a holdout outside.
double interval_score(double lb, double ub, double y, double alpha);

// Mean interval score over ages and windows at horizon h.
double mean_interval_score(const std::vector<IntervalForecast>& intervals,
                           const std::vector<DeathCurve>& holdouts, double alpha, int h,
                           int test_len = 20);

// theta and gamma per horizon 1..max_h, calibrated once per (panel,
// transform, horizon) on the nested validation block; horizons past the
// validation range reuse the deepest calibrated pair and are flagged.
struct HorizonCalibration {
    int horizon = 0;
    double alpha = 0.0;
    double theta = 0.0;
    Eigen::VectorXd gamma;
    double achieved_ecp = 0.0;
    bool extrapolated = false;
};
std::vector<HorizonCalibration> calibrate_horizons(const Panel& training_panel,
                                                   Transform transform, const Selector& selector,
                                                   double alpha, int max_h, int val_len = 20);

// The calibration step alone, from residual sets already in hand (lets
// callers calibrate several alpha levels off one validation pass).
std::vector<HorizonCalibration> calibrations_from_residuals(const std::vector<ResidualSet>& sets,
                                                            double alpha, int max_h);

struct IntervalErrorRow {
    int h = 0;
    double alpha = 0.0;
    double theta = 0.0;
    double ecp = 0.0;
    double cpd = 0.0;
    double mis = 0.0;
};

// Interval rows for horizons 1..test_len-1 from already-computed expanding
// forecasts and per-horizon calibrations.
std::vector<IntervalErrorRow> interval_rows_from_forecasts(
    const Panel& panel, const std::vector<SplitForecasts>& forecasts,
    const std::vector<HorizonCalibration>& cals, double alpha, int test_len);

// Interval backtest on the outer expanding window: calibrate on the nested
// validation block of the initial training sample, then score horizons
// 1..test_len-1 on the held-out test years.
std::vector<IntervalErrorRow> run_interval_backtest(const Panel& panel, Transform transform,
                                                    const Selector& selector, double alpha,
                                                    int test_len = 20);

}  // namespace dxcast
