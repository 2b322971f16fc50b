#include "dxcast/transforms.hpp"

#include <cmath>
#include <sstream>

namespace dxcast {

Panel floor_panel(const Panel& panel, double eps) {
    validate_panel(panel);
    Panel out = panel;
    for (Eigen::Index t = 0; t < panel.n_years(); ++t) {
        Eigen::VectorXd density = panel.counts.row(t).transpose() / panel.counts.row(t).sum();
        density = density.cwiseMax(eps);
        out.counts.row(t) = (density / density.sum()).transpose() * panel.radix;
    }
    return out;
}

std::pair<UnconstrainedMatrix, ClrBasis> clr_forward(const Panel& panel) {
    for (Eigen::Index t = 0; t < panel.n_years(); ++t) {
        for (Eigen::Index x = 0; x < panel.n_ages(); ++x) {
            if (!(panel.counts(t, x) > 0)) {
                std::ostringstream msg;
                msg << "clr_forward needs strictly positive counts; year "
                    << panel.years[static_cast<std::size_t>(t)] << " age " << x << " is "
                    << panel.counts(t, x);
                throw DomainError(msg.str());
            }
        }
    }
    const Eigen::MatrixXd logs = panel.counts.array().log();
    const Eigen::RowVectorXd col_means = logs.colwise().mean();

    UnconstrainedMatrix beta;
    beta.kind = TransformKind::ClrBeta;
    beta.matrix = logs.rowwise() - col_means;
    beta.years = panel.years;

    ClrBasis basis;
    basis.alpha = col_means.array().exp().transpose();
    basis.radix = panel.radix;
    return {std::move(beta), std::move(basis)};
}

DeathCurve clr_inverse(const Eigen::Ref<const Eigen::VectorXd>& beta_row, const ClrBasis& basis) {
    if (beta_row.size() != basis.alpha.size())
        throw DomainError("clr_inverse: row length does not match basis");
    Eigen::VectorXd counts = beta_row.array().exp() * basis.alpha.array();
    if (!counts.allFinite()) throw DomainError("clr_inverse: numeric overflow in exp");
    const double sum = counts.sum();
    if (!(sum > 0)) throw DomainError("clr_inverse: curve has non-positive mass");

    DeathCurve curve;
    curve.radix = basis.radix;
    curve.counts = counts * (basis.radix / sum);
    return curve;
}

UnconstrainedMatrix cdf_forward(const Panel& panel) {
    const Eigen::Index m = panel.n_ages();
    if (m < 2) throw DomainError("cdf_forward needs at least two ages");

    UnconstrainedMatrix z;
    z.kind = TransformKind::CdfLogit;
    z.matrix.resize(panel.n_years(), m - 1);
    z.years = panel.years;
    for (Eigen::Index t = 0; t < panel.n_years(); ++t) {
        const double total = panel.counts.row(t).sum();
        double cum = 0.0;
        for (Eigen::Index x = 0; x + 1 < m; ++x) {
            cum += panel.counts(t, x) / total;
            if (!(cum > 0.0) || !(cum < 1.0)) {
                std::ostringstream msg;
                msg << "cdf_forward: cumulative value at year "
                    << panel.years[static_cast<std::size_t>(t)] << " age " << x << " is " << cum
                    << ", outside (0,1); floor the panel first";
                throw DomainError(msg.str());
            }
            z.matrix(t, x) = std::log(cum / (1.0 - cum));
        }
    }
    return z;
}

DeathCurve cdf_inverse(const Eigen::Ref<const Eigen::VectorXd>& z_row, double radix) {
    const Eigen::Index m = z_row.size() + 1;
    Eigen::VectorXd counts(m);
    double prev = 0.0;
    for (Eigen::Index x = 0; x + 1 < m; ++x) {
        const double cum = 1.0 / (1.0 + std::exp(-z_row[x]));
        counts[x] = cum - prev;
        prev = cum;
    }
    counts[m - 1] = 1.0 - prev;  // final cumulative point pinned at 1
    counts = counts.cwiseMax(0.0);
    const double sum = counts.sum();
    if (!(sum > 0)) throw DomainError("cdf_inverse: curve has non-positive mass");

    DeathCurve curve;
    curve.radix = radix;
    curve.counts = counts * (radix / sum);
    return curve;
}

}  // namespace dxcast
