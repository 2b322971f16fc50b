#pragma once

#include "dxcast/types.hpp"

#include <optional>
#include <vector>

namespace dxcast {

// Period life table derived from a death-count curve with the mid-year
// convention (deaths live half the year of death at every age).
struct LifeTableDerived {
    Eigen::VectorXd lx;  // survivors, l_0 = radix, nonincreasing
    Eigen::VectorXd qx;  // death probabilities in [0,1]; 1 at the last age
    Eigen::VectorXd px;  // 1 - qx
    Eigen::VectorXd Lx;  // person-years lived in [x, x+1)
    Eigen::VectorXd Tx;  // person-years lived above x
    Eigen::VectorXd ex;  // period life expectancy; 0 where lx = 0
    double radix = kDefaultRadix;
};

// Tolerant of interval-bound curves that do not sum to the radix: survivors
// are clamped at zero and probabilities clipped into [0,1].  Exact for valid
// curves.
LifeTableDerived derive_lifetable(const DeathCurve& curve, double fraction_lived = 0.5);

// Survival of one entry cohort read diagonally through successive forecast
// years: the survival probability for age x+j-1 comes from the year-j table.
struct CohortSurvival {
    int entry_age = 0;
    int entry_year = 0;
    Eigen::VectorXd tau_p;  // tau-year survival, tau = 1..T, nonincreasing
};
CohortSurvival cohort_survival(const std::vector<DeathCurve>& forecast_curves, int entry_age);

// Flat continuously compounded discounting.
struct DiscountCurve {
    double rate = 0.0;
    double bond(double tau) const;  // B(0,tau) = exp(-rate * tau)
};

// Single-premium temporary immediate annuity paying one unit in arrears.
struct AnnuityQuote {
    int entry_age = 0;
    int maturity = 0;
    double rate = 0.0;
    double price = 0.0;
    std::optional<double> lb, ub;
    double coverage = 0.0;  // nominal level of (lb, ub) when present
};

// price = sum_{tau=1..T} exp(-rate*tau) * tau_p.
AnnuityQuote annuity_price(const CohortSurvival& survival, double rate, int maturity);

// Price interval from death-count interval curves: upper death counts give
// the lower price bound and vice versa; the returned pair is ordered.
std::pair<double, double> annuity_interval(const std::vector<DeathCurve>& lb_curves,
                                           const std::vector<DeathCurve>& ub_curves,
                                           int entry_age, double rate, int maturity);

struct LifeExpectancyRow {
    int year = 0;
    int age = 0;
    double ex = 0.0;
};

// Period life expectancy at the requested ages for each forecast year.
std::vector<LifeExpectancyRow> life_expectancy_table(const std::vector<DeathCurve>& curves,
                                                     const std::vector<int>& ages);

}  // namespace dxcast
