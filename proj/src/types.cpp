#include "dxcast/types.hpp"

#include <cmath>
#include <sstream>

namespace dxcast {

std::string to_string(Sex sex) { return sex == Sex::female ? "female" : "male"; }

Sex sex_from_string(const std::string& text) {
    if (text == "female" || text == "f") return Sex::female;
    if (text == "male" || text == "m") return Sex::male;
    throw ParseError("unknown sex '" + text + "' (expected female|male)");
}

void validate_death_curve(const DeathCurve& curve) {
    if (curve.counts.size() == 0) throw DomainError("death curve has no ages");
    if (!(curve.radix > 0)) throw DomainError("death curve radix must be positive");
    if ((curve.counts.array() < 0).any()) {
        Eigen::Index age = 0;
        curve.counts.minCoeff(&age);
        std::ostringstream msg;
        msg << "negative death count at age " << age << " (year " << curve.year << ")";
        throw DomainError(msg.str());
    }
    const double sum = curve.counts.sum();
    if (std::abs(sum - curve.radix) > 1e-6 * curve.radix) {
        std::ostringstream msg;
        msg << "death counts for year " << curve.year << " sum to " << sum
            << ", expected radix " << curve.radix;
        throw DomainError(msg.str());
    }
}

DeathCurve Panel::curve(Eigen::Index t) const {
    DeathCurve c;
    c.country = country;
    c.sex = sex;
    c.year = years.at(static_cast<std::size_t>(t));
    c.counts = counts.row(t);
    c.radix = radix;
    return c;
}

Panel Panel::first_years(Eigen::Index m) const {
    if (m < 1 || m > n_years()) throw DomainError("first_years: m out of range");
    Panel sub;
    sub.country = country;
    sub.sex = sex;
    sub.years.assign(years.begin(), years.begin() + m);
    sub.counts = counts.topRows(m);
    sub.radix = radix;
    return sub;
}

void validate_panel(const Panel& panel) {
    if (panel.n_years() < 2) throw DomainError("panel needs at least two years");
    if (static_cast<Eigen::Index>(panel.years.size()) != panel.n_years())
        throw DomainError("panel year labels do not match row count");
    for (std::size_t t = 1; t < panel.years.size(); ++t) {
        if (panel.years[t] <= panel.years[t - 1])
            throw DomainError("panel years must be strictly increasing");
    }
    for (Eigen::Index t = 0; t < panel.n_years(); ++t) validate_death_curve(panel.curve(t));
}

}  // namespace dxcast
