#include "dxcast/factor_model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dxcast {

int select_k_evr(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues, int k_max,
                 bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (k_max < 1) throw DomainError("select_k_evr: k_max must be at least 1");
    if (eigenvalues.size() < k_max + 1) {
        std::ostringstream msg;
        msg << "select_k_evr: need at least " << k_max + 1 << " eigenvalues, got "
            << eigenvalues.size();
        throw DomainError(msg.str());
    }
    for (Eigen::Index i = 0; i + 1 < eigenvalues.size(); ++i) {
        if (eigenvalues[i] < eigenvalues[i + 1])
            throw DomainError("select_k_evr: eigenvalues must be nonincreasing");
    }
    if (!(eigenvalues[0] > 0)) {
        if (degenerate) *degenerate = true;
        return 1;
    }
    const double guard = eigenvalues[0] * 1e-12;
    int best_k = 1;
    double best_ratio = eigenvalues[0] / (eigenvalues[1] + guard);
    for (int k = 2; k <= k_max; ++k) {
        const double ratio = eigenvalues[k - 1] / (eigenvalues[k] + guard);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_k = k;
        }
    }
    return best_k;
}

namespace {

void check_fit_invariants(const FactorFit& fit, const Eigen::MatrixXd& centered) {
    const Eigen::MatrixXd gram = fit.components * fit.components.transpose();
    const double ortho_err =
        (gram - Eigen::MatrixXd::Identity(fit.k, fit.k)).cwiseAbs().maxCoeff();
    if (ortho_err > 1e-8) throw DomainError("fit_pca: components are not orthonormal");
    for (Eigen::Index i = 0; i + 1 < fit.eigenvalues.size(); ++i) {
        if (fit.eigenvalues[i] < fit.eigenvalues[i + 1])
            throw DomainError("fit_pca: eigenvalues out of order");
    }
    const double score_err =
        (fit.scores - centered * fit.components.transpose()).cwiseAbs().maxCoeff();
    if (score_err > 1e-8) throw DomainError("fit_pca: scores do not match projections");
}

}  // namespace

FactorFit fit_pca(const Eigen::Ref<const Eigen::MatrixXd>& matrix, const Selector& selector) {
    const Eigen::Index n = matrix.rows();
    const Eigen::Index m = matrix.cols();
    if (n < 2) throw DomainError("fit_pca: need at least two rows");
    if (m < 1) throw DomainError("fit_pca: need at least one column");

    FactorFit fit;
    fit.mean_row = matrix.colwise().mean().transpose();
    const Eigen::MatrixXd centered = matrix.rowwise() - fit.mean_row.transpose();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DomainError("fit_pca: eigendecomposition failed");

    // The solver sorts ascending; flip to nonincreasing and clamp the tiny
    // negative values rounding can produce.
    fit.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
    Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();  // columns by eigenvalue

    int selected = 0;
    if (selector.kind == Selector::Kind::Fixed) {
        if (selector.fixed_k < 1) throw DomainError("fit_pca: fixed K must be at least 1");
        selected = selector.fixed_k;
    } else {
        const int k_max =
            std::max(1, std::min<int>(selector.k_max, static_cast<int>(fit.eigenvalues.size()) - 1));
        selected = select_k_evr(fit.eigenvalues, k_max, &fit.degenerate_spectrum);
    }
    fit.k = std::max(1, std::min<int>({selected, static_cast<int>(n) - 1, static_cast<int>(m)}));

    fit.components.resize(fit.k, m);
    for (int j = 0; j < fit.k; ++j) {
        Eigen::VectorXd v = vectors.col(j);
        Eigen::Index argmax = 0;
        v.cwiseAbs().maxCoeff(&argmax);
        if (v[argmax] < 0) v = -v;
        fit.components.row(j) = v.transpose();
    }
    fit.scores = centered * fit.components.transpose();

    check_fit_invariants(fit, centered);
    return fit;
}

Eigen::VectorXd reconstruct(const FactorFit& fit,
                            const Eigen::Ref<const Eigen::VectorXd>& score_vector) {
    if (score_vector.size() != fit.k) {
        std::ostringstream msg;
        msg << "reconstruct: expected " << fit.k << " scores, got " << score_vector.size();
        throw DomainError(msg.str());
    }
    return fit.mean_row + fit.components.transpose() * score_vector;
}

Eigen::MatrixXd reconstruction_residuals(const FactorFit& fit,
                                         const Eigen::Ref<const Eigen::MatrixXd>& matrix) {
    if (matrix.cols() != fit.mean_row.size())
        throw DomainError("reconstruction_residuals: column count does not match fit");
    const Eigen::MatrixXd centered = matrix.rowwise() - fit.mean_row.transpose();
    return centered - (centered * fit.components.transpose()) * fit.components;
}

}  // namespace dxcast
