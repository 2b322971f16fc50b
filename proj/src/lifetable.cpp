#include "dxcast/lifetable.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dxcast {

LifeTableDerived derive_lifetable(const DeathCurve& curve, double fraction_lived) {
    const Eigen::Index m = curve.counts.size();
    if (m < 1) throw DomainError("derive_lifetable: empty curve");
    if (!(fraction_lived >= 0.0 && fraction_lived <= 1.0))
        throw DomainError("derive_lifetable: fraction_lived must lie in [0,1]");

    LifeTableDerived lt;
    lt.radix = curve.radix;
    lt.lx.resize(m);
    lt.qx.resize(m);
    lt.px.resize(m);
    lt.Lx.resize(m);
    lt.Tx.resize(m);
    lt.ex.resize(m);

    Eigen::VectorXd l_next(m);  // survivors at x+1
    lt.lx[0] = curve.radix;
    for (Eigen::Index x = 0; x < m; ++x) {
        l_next[x] = std::max(0.0, lt.lx[x] - curve.counts[x]);
        if (x + 1 < m) lt.lx[x + 1] = l_next[x];
    }
    for (Eigen::Index x = 0; x < m; ++x) {
        if (lt.lx[x] > 0.0)
            lt.qx[x] = std::clamp(curve.counts[x] / lt.lx[x], 0.0, 1.0);
        else
            lt.qx[x] = 0.0;
    }
    if (lt.lx[m - 1] > 0.0) lt.qx[m - 1] = 1.0;  // closed final age
    lt.px = Eigen::VectorXd::Ones(m) - lt.qx;

    for (Eigen::Index x = 0; x < m; ++x)
        lt.Lx[x] = l_next[x] + fraction_lived * curve.counts[x];
    double running = 0.0;
    for (Eigen::Index x = m - 1; x >= 0; --x) {
        running += lt.Lx[x];
        lt.Tx[x] = running;
        lt.ex[x] = lt.lx[x] > 0.0 ? lt.Tx[x] / lt.lx[x] : 0.0;
    }
    return lt;
}

CohortSurvival cohort_survival(const std::vector<DeathCurve>& forecast_curves, int entry_age) {
    if (forecast_curves.empty()) throw DomainError("cohort_survival: no forecast curves");
    const int T = static_cast<int>(forecast_curves.size());
    const int max_age = static_cast<int>(forecast_curves.front().counts.size()) - 1;
    if (entry_age < 0 || entry_age + T > max_age) {
        std::ostringstream msg;
        msg << "cohort_survival: entry age " << entry_age << " with " << T
            << " forecast years exceeds age " << max_age;
        throw DomainError(msg.str());
    }

    CohortSurvival survival;
    survival.entry_age = entry_age;
    survival.entry_year = forecast_curves.front().year - 1;
    survival.tau_p.resize(T);
    double prod = 1.0;
    for (int j = 1; j <= T; ++j) {
        const LifeTableDerived lt = derive_lifetable(forecast_curves[static_cast<std::size_t>(j - 1)]);
        const Eigen::Index age = entry_age + j - 1;
        // A table whose survivors are exhausted at this age (possible for
        // interval-bound curves summing past the radix) cannot be survived;
        // its qx = 0 convention there serves ex bookkeeping, not survival.
        prod *= lt.lx[age] > 0.0 ? lt.px[age] : 0.0;
        survival.tau_p[j - 1] = prod;
    }
    return survival;
}

double DiscountCurve::bond(double tau) const {
    return std::exp(-rate * tau);
}

AnnuityQuote annuity_price(const CohortSurvival& survival, double rate, int maturity) {
    if (maturity < 1) throw DomainError("annuity_price: maturity must be at least 1");
    if (maturity > survival.tau_p.size()) {
        std::ostringstream msg;
        msg << "annuity_price: maturity " << maturity << " exceeds the " << survival.tau_p.size()
            << " survival years available";
        throw DomainError(msg.str());
    }
    if (rate < 0) throw DomainError("annuity_price: rate must be non-negative");

    const DiscountCurve discount{rate};
    AnnuityQuote quote;
    quote.entry_age = survival.entry_age;
    quote.maturity = maturity;
    quote.rate = rate;
    for (int tau = 1; tau <= maturity; ++tau)
        quote.price += discount.bond(tau) * survival.tau_p[tau - 1];
    return quote;
}

std::pair<double, double> annuity_interval(const std::vector<DeathCurve>& lb_curves,
                                           const std::vector<DeathCurve>& ub_curves,
                                           int entry_age, double rate, int maturity) {
    // More deaths -> lower survival -> cheaper annuity, so the upper
    // death-count curves price the lower bound.
    const double from_ub =
        annuity_price(cohort_survival(ub_curves, entry_age), rate, maturity).price;
    const double from_lb =
        annuity_price(cohort_survival(lb_curves, entry_age), rate, maturity).price;
    return std::minmax(from_ub, from_lb);
}

std::vector<LifeExpectancyRow> life_expectancy_table(const std::vector<DeathCurve>& curves,
                                                     const std::vector<int>& ages) {
    std::vector<LifeExpectancyRow> rows;
    for (const DeathCurve& curve : curves) {
        const LifeTableDerived lt = derive_lifetable(curve);
        for (int age : ages) {
            if (age < 0 || age >= lt.ex.size())
                throw DomainError("life_expectancy_table: age " + std::to_string(age) +
                                  " out of range");
            rows.push_back({curve.year, age, lt.ex[age]});
        }
    }
    return rows;
}

}  // namespace dxcast
