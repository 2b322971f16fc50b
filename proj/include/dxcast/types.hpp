#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace dxcast {

/// Ages 0..109 plus the open class 110+.
inline constexpr int kHmdAgeCount = 111;
inline constexpr double kDefaultRadix = 1e5;

/// An operation received input outside its domain contract.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (life-table files, CSV, config).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Sex { female, male };

std::string to_string(Sex sex);
Sex sex_from_string(const std::string& text);

/// Death counts for one population-year: non-negative, summing to the radix.
/// Production curves have kHmdAgeCount entries; the operations accept any length.
struct DeathCurve {
    std::string country;
    Sex sex = Sex::female;
    int year = 0;
    Eigen::VectorXd counts;
    double radix = kDefaultRadix;
};

/// Throws DomainError when counts are negative or the sum strays from the
/// radix by more than 1e-6 relative.
void validate_death_curve(const DeathCurve& curve);

/// Time-ordered stack of death curves for one population; row t is year years[t].
struct Panel {
    std::string country;
    Sex sex = Sex::female;
    std::vector<int> years;  // strictly increasing, one per row
    Eigen::MatrixXd counts;  // n_years x n_ages
    double radix = kDefaultRadix;

    Eigen::Index n_years() const { return counts.rows(); }
    Eigen::Index n_ages() const { return counts.cols(); }

    DeathCurve curve(Eigen::Index t) const;

    /// The sub-panel holding the first m years.
    Panel first_years(Eigen::Index m) const;
};

/// Throws DomainError when years are not strictly increasing, fewer than two
/// rows are present, or any row violates the death-curve invariants.
void validate_panel(const Panel& panel);

}  // namespace dxcast
