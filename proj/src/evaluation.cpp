#include "dxcast/evaluation.hpp"

#include "dxcast/ets.hpp"
#include "dxcast/hmd.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace dxcast {

std::string to_string(Transform transform) {
    return transform == Transform::Clr ? "clr" : "cdf";
}

Transform transform_from_string(const std::string& text) {
    if (text == "clr") return Transform::Clr;
    if (text == "cdf") return Transform::Cdf;
    throw DomainError("unknown transform '" + text + "' (expected clr or cdf)");
}

std::string to_string(const Selector& selector) {
    if (selector.kind == Selector::Kind::Evr) return "evr";
    return "k" + std::to_string(selector.fixed_k);
}

int WindowPlan::forecast_count(int h) const {
    if (h < 1 || h > test_len) return 0;
    return test_len + 1 - h;
}

WindowPlan make_window_plan(Eigen::Index n_years, int test_len) {
    if (test_len < 1) throw DomainError("make_window_plan: test_len must be positive");
    if (n_years <= test_len + 10) {
        std::ostringstream msg;
        msg << "make_window_plan: need more than " << test_len + 10 << " years, got " << n_years;
        throw DomainError(msg.str());
    }
    WindowPlan plan;
    plan.test_len = test_len;
    for (int j = 1; j <= test_len; ++j)
        plan.splits.push_back({n_years - test_len + j - 1, test_len + 1 - j});
    return plan;
}

namespace {

// Re-throw module errors with the pipeline stage attached so a backtest
// failure names where in the chain it happened.
template <typename Fn>
auto pipeline_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw DomainError(std::string("pipeline stage '") + stage + "': " + e.what());
    }
}

}  // namespace

std::vector<DeathCurve> run_pipeline(const Panel& panel, Transform transform,
                                     const Selector& selector, int horizon) {
    if (horizon < 1) throw DomainError("run_pipeline: horizon must be at least 1");
    validate_panel(panel);

    const Panel floored = pipeline_stage("floor", [&] { return floor_panel(panel); });

    UnconstrainedMatrix unconstrained;
    ClrBasis basis;
    if (transform == Transform::Clr) {
        pipeline_stage("forward transform (clr)", [&] {
            auto [beta, b] = clr_forward(floored);
            unconstrained = std::move(beta);
            basis = std::move(b);
            return 0;
        });
    } else {
        unconstrained =
            pipeline_stage("forward transform (cdf)", [&] { return cdf_forward(floored); });
    }

    const FactorFit fit =
        pipeline_stage("factor model", [&] { return fit_pca(unconstrained.matrix, selector); });

    Eigen::MatrixXd score_paths(horizon, fit.k);
    pipeline_stage("score forecast", [&] {
        for (int k = 0; k < fit.k; ++k) {
            const EtsModel model = select_ets(fit.scores.col(k));
            score_paths.col(k) = forecast_ets(model, horizon).point;
        }
        return 0;
    });

    const int last_year = panel.years.back();
    std::vector<DeathCurve> curves;
    curves.reserve(static_cast<std::size_t>(horizon));
    for (int h = 1; h <= horizon; ++h) {
        const Eigen::VectorXd row =
            pipeline_stage("reconstruct", [&] { return reconstruct(fit, score_paths.row(h - 1)); });
        DeathCurve curve = pipeline_stage("inverse transform", [&] {
            return transform == Transform::Clr ? clr_inverse(row, basis)
                                               : cdf_inverse(row, panel.radix);
        });
        curve.country = panel.country;
        curve.sex = panel.sex;
        curve.year = last_year + h;
        validate_death_curve(curve);
        curves.push_back(std::move(curve));
    }
    return curves;
}

std::vector<SplitForecasts> expanding_forecasts(const Panel& panel, Transform transform,
                                                const Selector& selector,
                                                const WindowPlan& plan) {
    std::vector<SplitForecasts> all;
    all.reserve(plan.splits.size());
    for (const WindowSplit& split : plan.splits) {
        SplitForecasts sf;
        sf.train_years = split.train_years;
        sf.curves = run_pipeline(panel.first_years(split.train_years), transform, selector,
                                 split.max_horizon);
        all.push_back(std::move(sf));
    }
    return all;
}

namespace {

constexpr double kDivergenceFloor = 1e-12;

Eigen::VectorXd floor_density(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double sum = v.sum();
    if (!(sum > 0)) throw DomainError("divergence input has non-positive mass");
    Eigen::VectorXd density = (v / sum).cwiseMax(kDivergenceFloor);
    return density / density.sum();
}

}  // namespace

double kld_sym(const Eigen::Ref<const Eigen::VectorXd>& p,
               const Eigen::Ref<const Eigen::VectorXd>& q) {
    if (p.size() != q.size()) throw DomainError("kld_sym: length mismatch");
    const Eigen::VectorXd fp = floor_density(p);
    const Eigen::VectorXd fq = floor_density(q);
    const Eigen::ArrayXd log_ratio = (fp.array() / fq.array()).log();
    return (fp.array() * log_ratio).sum() - (fq.array() * log_ratio).sum();
}

double jsd_geo(const Eigen::Ref<const Eigen::VectorXd>& p,
               const Eigen::Ref<const Eigen::VectorXd>& q) {
    if (p.size() != q.size()) throw DomainError("jsd_geo: length mismatch");
    const Eigen::VectorXd fp = floor_density(p);
    const Eigen::VectorXd fq = floor_density(q);
    const Eigen::ArrayXd delta = (fp.array() * fq.array()).sqrt();
    return 0.5 * (fp.array() * (fp.array() / delta).log()).sum() +
           0.5 * (fq.array() * (fq.array() / delta).log()).sum();
}

PointErrorRow aggregate_point_errors(const std::vector<DivergencePair>& pairs, int h,
                                     int test_len, Eigen::Index n_ages) {
    const std::size_t expected = static_cast<std::size_t>(test_len + 1 - h);
    if (h < 1 || h > test_len || pairs.size() != expected) {
        std::ostringstream msg;
        msg << "aggregate_point_errors: horizon " << h << " expects " << test_len + 1 - h
            << " pairs, got " << pairs.size();
        throw DomainError(msg.str());
    }
    const double norm = static_cast<double>(n_ages) * static_cast<double>(expected);
    PointErrorRow row;
    row.h = h;
    for (const DivergencePair& pair : pairs) {
        row.kld += pair.kld;
        row.jsd += pair.jsd;
    }
    row.kld /= norm;
    row.jsd /= norm;
    return row;
}

std::vector<PointErrorRow> point_rows_from_forecasts(const Panel& panel,
                                                     const std::vector<SplitForecasts>& forecasts,
                                                     int test_len) {
    std::vector<PointErrorRow> rows;
    for (int h = 1; h <= test_len; ++h) {
        std::vector<DivergencePair> pairs;
        for (const SplitForecasts& sf : forecasts) {
            const std::vector<DeathCurve>& curves = sf.curves;
            if (h > static_cast<int>(curves.size())) continue;
            const Eigen::Index holdout_row = sf.train_years + h - 1;
            const Eigen::VectorXd actual = panel.counts.row(holdout_row).transpose();
            DivergencePair pair;
            pair.kld = kld_sym(actual, curves[static_cast<std::size_t>(h - 1)].counts);
            pair.jsd = jsd_geo(actual, curves[static_cast<std::size_t>(h - 1)].counts);
            pairs.push_back(pair);
        }
        rows.push_back(aggregate_point_errors(pairs, h, test_len, panel.n_ages()));
    }
    return rows;
}

std::vector<PointErrorRow> run_point_backtest(const Panel& panel, Transform transform,
                                              const Selector& selector, int test_len) {
    const WindowPlan plan = make_window_plan(panel.n_years(), test_len);
    return point_rows_from_forecasts(panel, expanding_forecasts(panel, transform, selector, plan),
                                     test_len);
}

Panel make_synthetic_panel(Eigen::Index n_years, double drift, std::uint64_t seed,
                           const std::string& country, Sex sex) {
    if (n_years < 30) throw DomainError("make_synthetic_panel: need at least 30 years");

    // Panel-level parameters only, so drift = 0 yields identical rows.
    std::mt19937_64 rng(seed);
    const double modal_age0 = std::uniform_real_distribution<double>(68.0, 74.0)(rng);
    const double gompertz_b = std::uniform_real_distribution<double>(0.095, 0.115)(rng);
    const double infant_c = std::uniform_real_distribution<double>(0.005, 0.02)(rng);

    Panel panel;
    panel.country = country;
    panel.sex = sex;
    panel.radix = kDefaultRadix;
    panel.counts.resize(n_years, kHmdAgeCount);
    const int last_year = 2021;
    for (Eigen::Index t = 0; t < n_years; ++t) {
        panel.years.push_back(last_year - static_cast<int>(n_years) + 1 + static_cast<int>(t));
        const double modal_age = modal_age0 + drift * static_cast<double>(t);
        Eigen::VectorXd qx(kHmdAgeCount);
        for (int x = 0; x < kHmdAgeCount; ++x) {
            // Integrated hazard over [x, x+1): Gompertz senescence plus a
            // decaying infant-mortality term.
            const double gompertz =
                std::exp(gompertz_b * (x - modal_age)) * (std::exp(gompertz_b) - 1.0);
            const double infant =
                2.0 * infant_c * std::exp(-0.5 * x) * (1.0 - std::exp(-0.5));
            qx[x] = 1.0 - std::exp(-(gompertz + infant));
        }
        qx[kHmdAgeCount - 1] = 1.0;  // open age class
        panel.counts.row(t) = rebuild_death_counts(qx, panel.radix).counts.transpose();
    }
    validate_panel(panel);
    return panel;
}

}  // namespace dxcast
