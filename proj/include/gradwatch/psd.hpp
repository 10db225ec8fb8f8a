#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace gradwatch {

/// Result of eigenvalue clipping: repaired matrix, a factor L with
/// L L^T = matrix, the retained rank, and the clipped |eigenvalue| mass.
struct PsdRepair {
    Eigen::MatrixXd matrix;        // PSD by construction
    Eigen::MatrixXd factor;        // eigvecs * sqrt(clipped eigenvalues)
    Eigen::MatrixXd eigvecs;
    Eigen::VectorXd eigvals;       // clipped spectrum, ascending
    int rank = 0;
    double clipped_mass = 0.0;     // sum of clipped |lambda| over sum |lambda|
};

/// Symmetrize, eigendecompose, and zero out eigenvalues below
/// rel_threshold * lambda_max.
inline PsdRepair psd_repair(const Eigen::MatrixXd& M, double rel_threshold = 1e-10) {
    if (M.rows() != M.cols()) throw std::invalid_argument("psd_repair: matrix must be square");
    Eigen::MatrixXd sym = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw std::runtime_error("psd_repair: eigendecomposition failed");

    PsdRepair out;
    out.eigvecs = es.eigenvectors();
    Eigen::VectorXd lam = es.eigenvalues();
    const double lmax = std::max(lam.maxCoeff(), 0.0);
    const double thr = rel_threshold * lmax;

    double total = 0.0, clipped = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        total += std::abs(lam(i));
        if (lam(i) < thr) {
            clipped += std::abs(lam(i));
            lam(i) = 0.0;
        } else {
            ++out.rank;
        }
    }
    out.eigvals = lam;
    out.clipped_mass = total > 0.0 ? clipped / total : 0.0;
    out.matrix = out.eigvecs * lam.asDiagonal() * out.eigvecs.transpose();
    out.factor = out.eigvecs * lam.cwiseSqrt().asDiagonal();
    return out;
}

}  // namespace gradwatch
