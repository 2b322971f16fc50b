#pragma once

#include "dxcast/types.hpp"

namespace dxcast {

// How many principal components to retain.
struct Selector {
    enum class Kind { Evr, Fixed };
    Kind kind = Kind::Fixed;
    int fixed_k = 6;  // Fixed: requested component count
    int k_max = 10;   // Evr: largest k the ratio search may pick

    static Selector evr(int k_max = 10) { return {Kind::Evr, 6, k_max}; }
    static Selector fixed(int k) { return {Kind::Fixed, k, 10}; }
};

// Principal-component decomposition of a time-by-feature matrix.
struct FactorFit {
    Eigen::VectorXd mean_row;     // time mean, length m
    Eigen::MatrixXd components;   // K x m, orthonormal rows
    Eigen::VectorXd eigenvalues;  // full spectrum, nonincreasing, >= 0
    Eigen::MatrixXd scores;       // n x K projections of centered rows
    int k = 0;
    bool degenerate_spectrum = false;  // all eigenvalues were zero
};

// Eigenvalue-ratio choice of K: argmax over k <= k_max of
// lambda_k / (lambda_{k+1} + guard), guard = lambda_1 * 1e-12; ties go to the
// smallest k.  An all-zero spectrum returns 1 and sets *degenerate.
int select_k_evr(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues, int k_max = 10,
                 bool* degenerate = nullptr);

// Eigendecomposition of the (n-1)-divisor sample covariance of time-centered
// rows.  Component signs are fixed (largest-magnitude entry positive) so
// fits are reproducible.  K is capped at min(selected, n-1, m).
FactorFit fit_pca(const Eigen::Ref<const Eigen::MatrixXd>& matrix, const Selector& selector);

// mean_row + sum_k score_k * component_k.
Eigen::VectorXd reconstruct(const FactorFit& fit,
                            const Eigen::Ref<const Eigen::VectorXd>& score_vector);

// Rows minus their rank-K reconstruction (the omega residuals).
Eigen::MatrixXd reconstruction_residuals(const FactorFit& fit,
                                         const Eigen::Ref<const Eigen::MatrixXd>& matrix);

}  // namespace dxcast
