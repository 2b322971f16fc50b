#include "dxcast/uncertainty.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dxcast {

std::vector<ResidualSet> validation_residuals(const Panel& training_panel, Transform transform,
                                              const Selector& selector, int val_len) {
    if (val_len < 2) throw DomainError("validation_residuals: val_len must be at least 2");
    WindowPlan plan;
    try {
        plan = make_window_plan(training_panel.n_years(), val_len);
    } catch (const DomainError& e) {
        throw DomainError(std::string("validation_residuals: training sample too short for a "
                                      "nested validation block: ") +
                          e.what());
    }
    const std::vector<SplitForecasts> forecasts =
        expanding_forecasts(training_panel, transform, selector, plan);

    std::vector<ResidualSet> sets;
    for (int h = 1; h <= val_len - 1; ++h) {
        ResidualSet set;
        set.horizon = h;
        set.residuals.resize(val_len + 1 - h, training_panel.n_ages());
        Eigen::Index row = 0;
        for (const SplitForecasts& sf : forecasts) {
            if (h > static_cast<int>(sf.curves.size())) continue;
            const Eigen::Index holdout_row = sf.train_years + h - 1;
            set.residuals.row(row++) =
                training_panel.counts.row(holdout_row) -
                sf.curves[static_cast<std::size_t>(h - 1)].counts.transpose();
        }
        set.gamma = pointwise_sd(set.residuals);
        sets.push_back(std::move(set));
    }
    return sets;
}

Eigen::VectorXd pointwise_sd(const Eigen::Ref<const Eigen::MatrixXd>& residual_rows) {
    const Eigen::Index n = residual_rows.rows();
    if (n < 2) throw DomainError("pointwise_sd: need at least two residual rows");
    const Eigen::RowVectorXd mean = residual_rows.colwise().mean();
    const Eigen::MatrixXd centered = residual_rows.rowwise() - mean;
    return (centered.colwise().squaredNorm() / static_cast<double>(n - 1))
        .cwiseSqrt()
        .transpose();
}

ThetaCalibration calibrate_theta(const Eigen::Ref<const Eigen::MatrixXd>& residuals,
                                 const Eigen::Ref<const Eigen::VectorXd>& gamma, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError("calibrate_theta: alpha must lie in (0,1)");
    if (residuals.cols() != gamma.size())
        throw DomainError("calibrate_theta: gamma length does not match residual columns");
    const bool any_gamma = (gamma.array() > 0.0).any();
    const bool any_residual = (residuals.array() != 0.0).any();
    if (!any_gamma && any_residual)
        throw DomainError("calibrate_theta: all gamma are zero but residuals are not");

    const double target = 1.0 - alpha;
    const double total = static_cast<double>(residuals.rows() * residuals.cols());
    const Eigen::ArrayXXd abs_res = residuals.array().abs();

    ThetaCalibration best;
    best.alpha = alpha;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 3000; ++i) {
        const double theta = static_cast<double>(i) / 100.0;
        const Eigen::ArrayXXd bound =
            (theta * gamma.array()).transpose().replicate(residuals.rows(), 1);
        const double covered = static_cast<double>((abs_res <= bound).count());
        const double coverage = covered / total;
        const double gap = std::abs(coverage - target);
        if (gap < best_gap) {
            best_gap = gap;
            best.theta = theta;
            best.achieved_ecp = coverage;
        }
    }
    best.grid_cap_hit = best.theta >= 30.0;
    return best;
}

IntervalForecast build_interval(const DeathCurve& point_forecast,
                                const Eigen::Ref<const Eigen::VectorXd>& gamma, double theta,
                                int horizon, double alpha) {
    if (theta < 0) throw DomainError("build_interval: theta must be non-negative");
    if (point_forecast.counts.size() != gamma.size())
        throw DomainError("build_interval: gamma length does not match curve");
    IntervalForecast interval;
    interval.lb = (point_forecast.counts - theta * gamma).cwiseMax(0.0);
    interval.ub = point_forecast.counts + theta * gamma;
    interval.horizon = horizon;
    interval.nominal = 1.0 - alpha;
    return interval;
}

namespace {

void check_pair_count(std::size_t n_intervals, std::size_t n_holdouts, int h, int test_len,
                      const char* where) {
    const std::size_t expected = static_cast<std::size_t>(test_len + 1 - h);
    if (h < 1 || h > test_len || n_intervals != expected || n_holdouts != expected) {
        std::ostringstream msg;
        msg << where << ": horizon " << h << " expects " << test_len + 1 - h
            << " interval/holdout pairs, got " << n_intervals << "/" << n_holdouts;
        throw DomainError(msg.str());
    }
}

}  // namespace

double ecp(const std::vector<IntervalForecast>& intervals, const std::vector<DeathCurve>& holdouts,
           int h, int test_len) {
    check_pair_count(intervals.size(), holdouts.size(), h, test_len, "ecp");
    long outside = 0;
    long total = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const Eigen::VectorXd& y = holdouts[i].counts;
        if (y.size() != intervals[i].lb.size())
            throw DomainError("ecp: holdout length does not match interval");
        outside += (y.array() < intervals[i].lb.array()).count();
        outside += (y.array() > intervals[i].ub.array()).count();
        total += static_cast<long>(y.size());
    }
    return 1.0 - static_cast<double>(outside) / static_cast<double>(total);
}

double cpd(double ecp_value, double alpha) {
    return std::abs(ecp_value - (1.0 - alpha));
}

double interval_score(double lb, double ub, double y, double alpha) {
    if (lb > ub) throw DomainError("interval_score: lower bound exceeds upper bound");
    double score = ub - lb;
    if (y < lb) score += (2.0 / alpha) * (lb - y);
    if (y > ub) score += (2.0 / alpha) * (y - ub);
    return score;
}

double mean_interval_score(const std::vector<IntervalForecast>& intervals,
                           const std::vector<DeathCurve>& holdouts, double alpha, int h,
                           int test_len) {
    check_pair_count(intervals.size(), holdouts.size(), h, test_len, "mean_interval_score");
    double sum = 0.0;
    long total = 0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const Eigen::VectorXd& y = holdouts[i].counts;
        if (y.size() != intervals[i].lb.size())
            throw DomainError("mean_interval_score: holdout length does not match interval");
        for (Eigen::Index x = 0; x < y.size(); ++x)
            sum += interval_score(intervals[i].lb[x], intervals[i].ub[x], y[x], alpha);
        total += static_cast<long>(y.size());
    }
    return sum / static_cast<double>(total);
}

std::vector<HorizonCalibration> calibrations_from_residuals(const std::vector<ResidualSet>& sets,
                                                            double alpha, int max_h) {
    if (max_h < 1) throw DomainError("calibrations_from_residuals: max_h must be at least 1");
    if (sets.empty()) throw DomainError("calibrations_from_residuals: no residual sets");
    std::vector<HorizonCalibration> cals;
    for (int h = 1; h <= max_h; ++h) {
        HorizonCalibration cal;
        cal.horizon = h;
        cal.alpha = alpha;
        if (h <= static_cast<int>(sets.size())) {
            const ResidualSet& set = sets[static_cast<std::size_t>(h - 1)];
            const ThetaCalibration theta = calibrate_theta(set.residuals, set.gamma, alpha);
            cal.theta = theta.theta;
            cal.gamma = set.gamma;
            cal.achieved_ecp = theta.achieved_ecp;
        } else {
            // Beyond the validation range: reuse the deepest calibrated pair.
            const HorizonCalibration& deepest = cals.back();
            cal.theta = deepest.theta;
            cal.gamma = deepest.gamma;
            cal.achieved_ecp = deepest.achieved_ecp;
            cal.extrapolated = true;
        }
        cals.push_back(std::move(cal));
    }
    return cals;
}

std::vector<HorizonCalibration> calibrate_horizons(const Panel& training_panel,
                                                   Transform transform, const Selector& selector,
                                                   double alpha, int max_h, int val_len) {
    return calibrations_from_residuals(
        validation_residuals(training_panel, transform, selector, val_len), alpha, max_h);
}

std::vector<IntervalErrorRow> interval_rows_from_forecasts(
    const Panel& panel, const std::vector<SplitForecasts>& forecasts,
    const std::vector<HorizonCalibration>& cals, double alpha, int test_len) {
    if (static_cast<int>(cals.size()) < test_len - 1)
        throw DomainError("interval_rows_from_forecasts: need calibrations up to test_len-1");
    std::vector<IntervalErrorRow> rows;
    for (int h = 1; h <= test_len - 1; ++h) {
        const HorizonCalibration& cal = cals[static_cast<std::size_t>(h - 1)];
        std::vector<IntervalForecast> intervals;
        std::vector<DeathCurve> holdouts;
        for (const SplitForecasts& sf : forecasts) {
            if (h > static_cast<int>(sf.curves.size())) continue;
            intervals.push_back(build_interval(sf.curves[static_cast<std::size_t>(h - 1)],
                                               cal.gamma, cal.theta, h, alpha));
            DeathCurve actual;
            actual.country = panel.country;
            actual.sex = panel.sex;
            actual.year = panel.years[static_cast<std::size_t>(sf.train_years + h - 1)];
            actual.radix = panel.radix;
            actual.counts = panel.counts.row(sf.train_years + h - 1).transpose();
            holdouts.push_back(std::move(actual));
        }
        IntervalErrorRow row;
        row.h = h;
        row.alpha = alpha;
        row.theta = cal.theta;
        row.ecp = ecp(intervals, holdouts, h, test_len);
        row.cpd = cpd(row.ecp, alpha);
        row.mis = mean_interval_score(intervals, holdouts, alpha, h, test_len);
        rows.push_back(row);
    }
    return rows;
}

std::vector<IntervalErrorRow> run_interval_backtest(const Panel& panel, Transform transform,
                                                    const Selector& selector, double alpha,
                                                    int test_len) {
    const WindowPlan plan = make_window_plan(panel.n_years(), test_len);
    const Panel training = panel.first_years(panel.n_years() - test_len);
    const std::vector<HorizonCalibration> cals =
        calibrate_horizons(training, transform, selector, alpha, test_len - 1);
    return interval_rows_from_forecasts(panel, expanding_forecasts(panel, transform, selector, plan),
                                        cals, alpha, test_len);
}

}  // namespace dxcast
