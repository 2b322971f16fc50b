#include "dxcast/ets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace dxcast {

const std::vector<EtsSpec>& ets_candidates() {
    static const std::vector<EtsSpec> all = {
        {EtsError::Additive, EtsTrend::None},
        {EtsError::Additive, EtsTrend::Additive},
        {EtsError::Additive, EtsTrend::AdditiveDamped},
        {EtsError::Multiplicative, EtsTrend::None},
        {EtsError::Multiplicative, EtsTrend::Additive},
        {EtsError::Multiplicative, EtsTrend::AdditiveDamped},
    };
    return all;
}

std::string EtsModel::tag() const {
    if (fallback_naive) return "naive";
    if (fallback_rwdrift) return "rwdrift";
    const char* e = error_type == EtsError::Additive ? "A" : "M";
    const char* t = trend_type == EtsTrend::None
                        ? "N"
                        : (trend_type == EtsTrend::Additive ? "A" : "Ad");
    return std::string("ETS(") + e + "," + t + ")";
}

namespace {

constexpr double kPenalty = 1e300;
constexpr double kAlphaLo = 1e-4, kAlphaHi = 0.9999;
constexpr double kBetaLo = 1e-4;
constexpr double kPhiLo = 0.8, kPhiHi = 0.98;

// Free parameters including initial states and the innovation variance.
int param_count(EtsTrend trend) {
    switch (trend) {
        case EtsTrend::None: return 3;
        case EtsTrend::Additive: return 5;
        case EtsTrend::AdditiveDamped: return 6;
    }
    return 0;
}

// Dimension of the optimizer search space (everything but the variance,
// which is profiled out of the Gaussian likelihood).
int opt_dim(EtsTrend trend) {
    switch (trend) {
        case EtsTrend::None: return 2;
        case EtsTrend::Additive: return 4;
        case EtsTrend::AdditiveDamped: return 5;
    }
    return 0;
}

struct EtsParams {
    double alpha = 0.0, beta = 0.0, phi = 1.0;
    double level0 = 0.0, trend0 = 0.0;
};

// Search-space layout: [alpha, level0] / [alpha, beta, level0, trend0] /
// [alpha, beta, phi, level0, trend0].  Box constraints are enforced by
// projection so the simplex itself can roam freely.
EtsParams unpack(const EtsSpec& spec, const Eigen::VectorXd& x) {
    EtsParams p;
    p.alpha = std::clamp(x[0], kAlphaLo, kAlphaHi);
    switch (spec.trend) {
        case EtsTrend::None:
            p.level0 = x[1];
            break;
        case EtsTrend::Additive:
            p.beta = std::clamp(x[1], kBetaLo, p.alpha);
            p.level0 = x[2];
            p.trend0 = x[3];
            break;
        case EtsTrend::AdditiveDamped:
            p.beta = std::clamp(x[1], kBetaLo, p.alpha);
            p.phi = std::clamp(x[2], kPhiLo, kPhiHi);
            p.level0 = x[3];
            p.trend0 = x[4];
            break;
    }
    return p;
}

// Run the innovations recursion and return the negative log-likelihood.
// Multiplicative errors contribute the sum of ln|fitted| Jacobian terms.
double neg_loglik(const EtsSpec& spec, const EtsParams& p,
                  const Eigen::Ref<const Eigen::VectorXd>& y, double scale,
                  double* level_out = nullptr, double* trend_out = nullptr) {
    const Eigen::Index n = y.size();
    double level = p.level0;
    double trend = p.trend0;
    double sse = 0.0;
    double log_fitted = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        double mu = level;
        if (spec.trend == EtsTrend::Additive)
            mu += trend;
        else if (spec.trend == EtsTrend::AdditiveDamped)
            mu += p.phi * trend;

        double err;
        if (spec.error == EtsError::Additive) {
            err = y[t] - mu;
        } else {
            if (!(std::abs(mu) > 1e-12 * scale)) return kPenalty;
            err = (y[t] - mu) / mu;
            log_fitted += std::log(std::abs(mu));
        }
        sse += err * err;
        if (!std::isfinite(sse) || std::abs(level) > 1e150 || std::abs(trend) > 1e150)
            return kPenalty;

        if (spec.error == EtsError::Additive) {
            level = mu + p.alpha * err;
            if (spec.trend == EtsTrend::Additive)
                trend += p.beta * err;
            else if (spec.trend == EtsTrend::AdditiveDamped)
                trend = p.phi * trend + p.beta * err;
        } else {
            level = mu * (1.0 + p.alpha * err);
            if (spec.trend == EtsTrend::Additive)
                trend += p.beta * mu * err;
            else if (spec.trend == EtsTrend::AdditiveDamped)
                trend = p.phi * trend + p.beta * mu * err;
        }
    }
    const double mse = std::max(sse / static_cast<double>(n), 1e-300);
    double nll = 0.5 * static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * mse) + 1.0);
    if (spec.error == EtsError::Multiplicative) nll += log_fitted;
    if (!std::isfinite(nll)) return kPenalty;
    if (level_out) *level_out = level;
    if (trend_out) *trend_out = trend;
    return nll;
}

struct NmOutcome {
    Eigen::VectorXd x;
    double f = kPenalty;
    bool converged = false;
};

// Textbook Nelder-Mead with fixed coefficients (reflect 1, expand 2,
// contract 1/2, shrink 1/2).  Fully deterministic: fixed initial simplex,
// stable sorting.
template <typename F>
NmOutcome nelder_mead(const F& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& steps,
                      int max_iter, double tol) {
    const int dim = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(dim) + 1, x0);
    for (int i = 0; i < dim; ++i) pts[static_cast<std::size_t>(i) + 1][i] += steps[i];
    std::vector<double> fv(static_cast<std::size_t>(dim) + 1);
    for (std::size_t i = 0; i < pts.size(); ++i) fv[i] = f(pts[i]);

    NmOutcome out;
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<std::size_t> order(pts.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<Eigen::VectorXd> spts(pts.size());
        std::vector<double> sfv(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            spts[i] = pts[order[i]];
            sfv[i] = fv[order[i]];
        }
        pts.swap(spts);
        fv.swap(sfv);

        if (fv.back() - fv.front() <= tol) {
            out.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < dim; ++i) centroid += pts[static_cast<std::size_t>(i)];
        centroid /= static_cast<double>(dim);
        const Eigen::VectorXd& worst = pts.back();

        const Eigen::VectorXd reflected = centroid + (centroid - worst);
        const double fr = f(reflected);
        if (fr < fv.front()) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - worst);
            const double fe = f(expanded);
            if (fe < fr) {
                pts.back() = expanded;
                fv.back() = fe;
            } else {
                pts.back() = reflected;
                fv.back() = fr;
            }
            continue;
        }
        if (fr < fv[fv.size() - 2]) {
            pts.back() = reflected;
            fv.back() = fr;
            continue;
        }
        bool shrink = false;
        if (fr < fv.back()) {
            const Eigen::VectorXd contracted = centroid + 0.5 * (centroid - worst);
            const double fc = f(contracted);
            if (fc <= fr) {
                pts.back() = contracted;
                fv.back() = fc;
            } else {
                shrink = true;
            }
        } else {
            const Eigen::VectorXd contracted = centroid - 0.5 * (centroid - worst);
            const double fc = f(contracted);
            if (fc < fv.back()) {
                pts.back() = contracted;
                fv.back() = fc;
            } else {
                shrink = true;
            }
        }
        if (shrink) {
            for (std::size_t i = 1; i < pts.size(); ++i) {
                pts[i] = pts.front() + 0.5 * (pts[i] - pts.front());
                fv[i] = f(pts[i]);
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < fv.size(); ++i)
        if (fv[i] < fv[best]) best = i;
    out.x = pts[best];
    out.f = fv[best];
    return out;
}

}  // namespace

std::optional<EtsModel> fit_ets(const Eigen::Ref<const Eigen::VectorXd>& series,
                                const EtsSpec& spec) {
    const Eigen::Index n = series.size();
    if (n < 4) throw DomainError("fit_ets: need at least four observations");
    const int k = param_count(spec.trend);
    if (n - k - 1 <= 0) return std::nullopt;  // AICc correction undefined

    if (spec.error == EtsError::Multiplicative) {
        const bool has_zero = (series.array() == 0.0).any();
        const bool crosses_zero = series.minCoeff() < 0.0 && series.maxCoeff() > 0.0;
        if (has_zero || crosses_zero) return std::nullopt;
    }

    double scale = series.cwiseAbs().maxCoeff();
    if (scale == 0.0) scale = 1.0;

    const double level_init = series[0];
    const Eigen::Index diff_pts = std::min<Eigen::Index>(10, n);
    const double trend_init =
        diff_pts >= 2 ? (series[diff_pts - 1] - series[0]) / static_cast<double>(diff_pts - 1)
                      : 0.0;

    const int dim = opt_dim(spec.trend);
    const double alpha_starts[5] = {0.1, 0.5, 0.9, 0.3, 0.7};
    const auto objective = [&](const Eigen::VectorXd& x) {
        return neg_loglik(spec, unpack(spec, x), series, scale);
    };

    NmOutcome best;
    for (double a : alpha_starts) {
        Eigen::VectorXd x0(dim), steps(dim);
        int i = 0;
        x0[i] = a;
        steps[i++] = 0.1;
        if (spec.trend != EtsTrend::None) {
            x0[i] = a / 2.0;
            steps[i++] = 0.05;
        }
        if (spec.trend == EtsTrend::AdditiveDamped) {
            x0[i] = 0.9;
            steps[i++] = 0.05;
        }
        x0[i] = level_init;
        steps[i++] = std::max(0.1, 0.1 * std::abs(level_init));
        if (spec.trend != EtsTrend::None) {
            x0[i] = trend_init;
            steps[i++] = std::max(0.01, 0.1 * std::abs(trend_init));
        }
        const NmOutcome run = nelder_mead(objective, x0, steps, 500, 1e-8);
        if (run.f < best.f) best = run;
    }
    if (!(best.f < kPenalty)) return std::nullopt;  // no usable likelihood anywhere

    const EtsParams p = unpack(spec, best.x);
    EtsModel model;
    model.error_type = spec.error;
    model.trend_type = spec.trend;
    model.alpha = p.alpha;
    model.beta = spec.trend == EtsTrend::None ? 0.0 : p.beta;
    model.phi = spec.trend == EtsTrend::AdditiveDamped ? p.phi : 1.0;
    model.level0 = p.level0;
    model.trend0 = spec.trend == EtsTrend::None ? 0.0 : p.trend0;
    const double nll = neg_loglik(spec, p, series, scale, &model.level_n, &model.trend_n);
    model.loglik = -nll;
    model.n_obs = static_cast<int>(n);
    model.n_params = k;
    const double dn = static_cast<double>(n);
    model.aicc = 2.0 * nll + 2.0 * k + 2.0 * k * (k + 1.0) / (dn - k - 1.0);
    model.converged = best.converged;
    return model;
}

std::vector<std::pair<EtsSpec, std::optional<EtsModel>>> fit_ets_candidates(
    const Eigen::Ref<const Eigen::VectorXd>& series) {
    std::vector<std::pair<EtsSpec, std::optional<EtsModel>>> fits;
    for (const EtsSpec& spec : ets_candidates()) fits.emplace_back(spec, fit_ets(series, spec));
    return fits;
}

EtsModel select_ets(const Eigen::Ref<const Eigen::VectorXd>& series) {
    const Eigen::Index n = series.size();
    if (n < 1) throw DomainError("select_ets: empty series");
    if (n < 4) {
        EtsModel model;
        model.fallback_naive = true;
        model.level0 = series[0];
        model.level_n = series[n - 1];
        model.n_obs = static_cast<int>(n);
        return model;
    }
    std::optional<EtsModel> best;
    for (const EtsSpec& spec : ets_candidates()) {
        std::optional<EtsModel> fit = fit_ets(series, spec);
        if (!fit) continue;
        if (!best || fit->aicc < best->aicc) best = std::move(fit);
    }
    if (best) return *best;

    EtsModel model;  // every candidate inadmissible: random walk with drift
    model.fallback_rwdrift = true;
    model.trend_type = EtsTrend::Additive;
    model.level0 = series[0];
    model.level_n = series[n - 1];
    model.trend_n = (series[n - 1] - series[0]) / static_cast<double>(n - 1);
    model.n_obs = static_cast<int>(n);
    return model;
}

ScoreForecast forecast_ets(const EtsModel& model, int H) {
    if (H < 1) throw DomainError("forecast_ets: horizon must be at least 1");
    Eigen::VectorXd point(H);
    double phi_pow = 1.0;
    double damp_sum = 0.0;
    for (int h = 1; h <= H; ++h) {
        switch (model.trend_type) {
            case EtsTrend::None:
                point[h - 1] = model.level_n;
                break;
            case EtsTrend::Additive:
                point[h - 1] = model.level_n + h * model.trend_n;
                break;
            case EtsTrend::AdditiveDamped:
                phi_pow *= model.phi;
                damp_sum += phi_pow;
                point[h - 1] = model.level_n + damp_sum * model.trend_n;
                break;
        }
    }
    if (!point.allFinite()) throw DomainError("forecast_ets: non-finite forecast");
    return {std::move(point), model.tag()};
}

}  // namespace dxcast
