#pragma once

#include "dxcast/types.hpp"

#include <utility>
#include <vector>

namespace dxcast {

// Which unconstrained representation a matrix holds.
enum class TransformKind { ClrBeta, CdfLogit };

// Per-age geometric means used to invert the centered log-ratio map.
struct ClrBasis {
    Eigen::VectorXd alpha;  // geometric mean curve, strictly positive
    double radix = kDefaultRadix;
};

// Time-by-feature matrix living in unconstrained space.  CLR keeps all ages
// (m columns); the CDF/logit map drops the final cumulative point, which is
// pinned at 1 (m-1 columns).
struct UnconstrainedMatrix {
    TransformKind kind = TransformKind::ClrBeta;
    Eigen::MatrixXd matrix;  // n_years x columns
    std::vector<int> years;
};

// Floor each row's density at eps and renormalize back to the radix.  Run
// this before either forward transform so zero counts cannot blow up the
// logarithms.
Panel floor_panel(const Panel& panel, double eps = 1e-12);

// Centered log-ratio: beta_{t,x} = ln d_{t,x} - mean_t ln d_{t,x}.  Requires
// strictly positive counts.  Columns of beta are mean-zero by construction.
std::pair<UnconstrainedMatrix, ClrBasis> clr_forward(const Panel& panel);

// exp(beta) * alpha, rescaled so the curve sums to the radix again.
DeathCurve clr_inverse(const Eigen::Ref<const Eigen::VectorXd>& beta_row, const ClrBasis& basis);

// Cumulative-sum-then-logit map.  Rows are normalized to densities first;
// the logit is applied to the cumulative values at all ages but the last.
UnconstrainedMatrix cdf_forward(const Panel& panel);

// Inverse logit, re-pin the final cumulative point at 1, difference, scale
// by the radix.  Negative differences (possible for non-monotone inputs) are
// clipped to zero and the curve renormalized.
DeathCurve cdf_inverse(const Eigen::Ref<const Eigen::VectorXd>& z_row, double radix);

}  // namespace dxcast
