#pragma once

#include "ethlab/sparse.hpp"

#include <Eigen/Dense>

namespace ethlab {

struct KrylovOptions {
    int krylov_dim = 30;
    double tol = 1e-10;        // error budget per call to step()
    int max_substeps = 1 << 20;
};

struct PropagationStats {
    long substeps = 0;
    long invariant_subspaces = 0;  // Lanczos terminated early: exact step
    double max_error_estimate = 0.0;
};

// exp(-i H dt) applied through Lanczos with full reorthogonalization. Each
// substep builds a Krylov basis from the current state and shrinks its time
// step until the a posteriori estimate beta_m |[exp(-i tau T) e1]_m| fits the
// share tol * tau / dt of the error budget.
class KrylovPropagator {
public:
    KrylovPropagator(const SparseHamiltonian& h, KrylovOptions options = {});

    void step(Eigen::VectorXcd& psi, double dt);
    const PropagationStats& stats() const { return stats_; }

private:
    struct Basis {
        Eigen::MatrixXcd v;  // n x k orthonormal columns
        Eigen::VectorXd alpha;
        Eigen::VectorXd beta;  // beta[j] couples j and j+1; beta[k-1] is the residual norm
        bool invariant = false;
    };
    Basis lanczos(const Eigen::VectorXcd& start);

    const SparseHamiltonian& h_;
    KrylovOptions opt_;
    PropagationStats stats_;
    double last_tau_ = 0.0;
};

}  // namespace ethlab
