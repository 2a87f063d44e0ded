#include "ethlab/krylov.hpp"

#include "ethlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace ethlab {

KrylovPropagator::KrylovPropagator(const SparseHamiltonian& h, KrylovOptions options) : h_(h), opt_(options) {
    if (opt_.krylov_dim < 2) throw ConfigError("krylov_dim must be at least 2");
    if (!(opt_.tol > 0.0)) throw ConfigError("Krylov tolerance must be positive");
}

KrylovPropagator::Basis KrylovPropagator::lanczos(const Eigen::VectorXcd& start) {
    const Eigen::Index n = start.size();
    const int m = static_cast<int>(std::min<Eigen::Index>(opt_.krylov_dim, n));
    Basis b;
    b.v.resize(n, m);
    b.alpha.resize(m);
    b.beta.resize(m);
    b.v.col(0) = start / start.norm();

    Eigen::VectorXcd w(n);
    int k = 0;
    for (int j = 0; j < m; ++j) {
        w = matvec(h_, Eigen::VectorXcd(b.v.col(j)));
        b.alpha[j] = b.v.col(j).dot(w).real();
        // Two passes of classical Gram-Schmidt against the whole basis.
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXcd c = b.v.leftCols(j + 1).adjoint() * w;
            w.noalias() -= b.v.leftCols(j + 1) * c;
        }
        const double beta = w.norm();
        b.beta[j] = beta;
        k = j + 1;
        // A vanishing residual means the basis spans an invariant subspace.
        if (beta <= 1e-12 * std::max(1.0, std::abs(b.alpha[j]))) {
            b.invariant = true;
            break;
        }
        if (j + 1 < m) b.v.col(j + 1) = w / beta;
    }
    if (k < m) {
        b.v.conservativeResize(Eigen::NoChange, k);
        b.alpha.conservativeResize(k);
        b.beta.conservativeResize(k);
    }
    return b;
}

void KrylovPropagator::step(Eigen::VectorXcd& psi, double dt) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (static_cast<std::size_t>(psi.size()) != h_.dim) throw std::invalid_argument("state has wrong dimension");

    double remaining = dt;
    if (last_tau_ <= 0.0) last_tau_ = dt;
    while (remaining > 1e-15 * dt) {
        if (++stats_.substeps > opt_.max_substeps) throw NumericalError("Krylov propagation exceeded substep limit");
        const double norm = psi.norm();
        if (norm == 0.0) return;
        const Basis b = lanczos(psi);
        const auto k = b.alpha.size();

        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
        t.diagonal() = b.alpha;
        for (Eigen::Index j = 0; j + 1 < k; ++j) t(j, j + 1) = t(j + 1, j) = b.beta[j];
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        const Eigen::VectorXd& theta = es.eigenvalues();
        const Eigen::VectorXd s0 = es.eigenvectors().row(0).transpose();

        auto small_exp = [&](double tau) {
            Eigen::VectorXcd y(k);
            for (Eigen::Index j = 0; j < k; ++j) y[j] = std::polar(s0[j], -tau * theta[j]);
            return Eigen::VectorXcd(es.eigenvectors().cast<std::complex<double>>() * y);
        };

        double tau = std::min(remaining, 2.0 * last_tau_);
        Eigen::VectorXcd y;
        double err = 0.0;
        int tries = 0;
        for (;; ++tries) {
            y = small_exp(tau);
            err = b.invariant ? 0.0 : norm * b.beta[k - 1] * std::abs(y[k - 1]);
            if (err <= opt_.tol * tau / dt) break;
            if (tries > 200) throw NumericalError("Krylov step size underflow");
            tau *= 0.5;
        }
        if (b.invariant) ++stats_.invariant_subspaces;
        stats_.max_error_estimate = std::max(stats_.max_error_estimate, err);
        psi = norm * (b.v * y);
        remaining -= tau;
        // A step clipped by the end of the interval says nothing about the size that would be accepted.
        last_tau_ = tries > 0 ? tau : std::max(last_tau_, tau);
    }
}

}  // namespace ethlab
