#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace ethlab {

struct EigenDecomposition {
    Eigen::VectorXd energies;  // ascending
    Eigen::MatrixXd vectors;   // column k belongs to energies[k]

    std::size_t dim() const { return static_cast<std::size_t>(energies.size()); }
};

enum class EigBackend {
    Lapack,       // LAPACK dsyevr (relatively robust representations)
    Householder,  // in-house Householder tridiagonalization + implicit-shift QL
};

// Full decomposition of a real symmetric matrix. Rejects inputs whose asymmetry
// exceeds 1e-12 (scaled by max(1, max|A|)). Equal eigenvalues keep the order in
// which the backend produced them.
EigenDecomposition eigh(const Eigen::MatrixXd& a, EigBackend backend = EigBackend::Lapack);

// Eigenvalues only; much cheaper for spectral statistics.
Eigen::VectorXd eigvalsh(const Eigen::MatrixXd& a, EigBackend backend = EigBackend::Lapack);

double orthogonality_defect(const Eigen::MatrixXd& q);                           // max |Q^T Q - I|
double reconstruction_residual(const Eigen::MatrixXd& a, const EigenDecomposition& eig);  // max |AQ - QΛ|

}  // namespace ethlab
