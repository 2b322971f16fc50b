#pragma once

#include "dxcast/types.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace dxcast {

/// One row of an HMD 1x1 period life table as published.
/// Missing values (printed as ".") are left unset.
struct LifeTableRow {
    int year = 0;
    int age = 0;  // the "110+" open class maps to 110
    std::optional<double> mx, qx, ax, lx, dx, Lx, Tx, ex;
};

/// Parse HMD 1x1 period life-table text: header lines followed by
/// whitespace-delimited rows with columns Year Age mx qx ax lx dx Lx Tx ex.
/// Every year block must cover ages 0..110 exactly once.
/// Throws ParseError naming the offending year or line.
std::vector<LifeTableRow> parse_hmd_lifetable(const std::string& text);

/// Render rows in the layout parse_hmd_lifetable accepts. parse(write(rows))
/// reproduces rows exactly.
std::string write_hmd_lifetable(const std::vector<LifeTableRow>& rows,
                                const std::string& title = "Life table (period 1x1)");

/// Rebuild death counts from one year of death probabilities and the radix:
/// l_0 = radix, d_x = l_x * q_x, l_{x+1} = l_x - d_x; the last age takes every
/// remaining survivor, so the counts telescope back to the radix.
/// qx entries must lie in [0,1]; the final entry is treated as 1 regardless.
DeathCurve rebuild_death_counts(const Eigen::Ref<const Eigen::VectorXd>& qx,
                                double radix = kDefaultRadix);

/// Counts scaled to sum to one. Throws DomainError on an all-zero curve.
Eigen::VectorXd normalize_to_density(const Eigen::Ref<const Eigen::VectorXd>& counts);
Eigen::VectorXd normalize_to_density(const DeathCurve& curve);

struct PanelBuildResult {
    Panel panel;
    std::vector<int> dropped_years;  // years skipped because some qx was missing
};

/// Assemble a panel from parsed rows, rebuilding each year's counts from qx.
/// Years with any missing qx are dropped and reported, not imputed.
PanelBuildResult build_panel(const std::vector<LifeTableRow>& rows, const std::string& country,
                             Sex sex, double radix = kDefaultRadix);

/// Canonical CSV exchange format: country,sex,year,age,dx with dx at 6 decimals.
/// Lines starting with '#' are comments.
void write_dx_csv(std::ostream& out, const std::vector<Panel>& panels,
                  const std::vector<std::string>& comments = {});
std::vector<Panel> read_dx_csv(std::istream& in, double radix = kDefaultRadix);

}  // namespace dxcast
