#pragma once
// Independent dense reference implementations used only by the tests.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <complex>
#include <random>
#include <vector>

namespace oracle {

inline Eigen::MatrixXd sx() { return (Eigen::MatrixXd(2, 2) << 0, 0.5, 0.5, 0).finished(); }
inline Eigen::MatrixXd sz() { return (Eigen::MatrixXd(2, 2) << -0.5, 0, 0, 0.5).finished(); }

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        for (Eigen::Index c = 0; c < a.cols(); ++c) out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
    return out;
}

// Single-site operator on an n-site chain; site n is the most significant factor.
inline Eigen::MatrixXd site_op(const Eigen::MatrixXd& m, int site, int n) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(1, 1);
    for (int l = n; l >= 1; --l) out = kron(out, l == site ? m : Eigen::MatrixXd::Identity(2, 2));
    return out;
}

struct Chain {
    int n = 3;
    double bx = 0.9, jz = 1.0;
    std::vector<std::pair<int, double>> defects;
    bool periodic = true;
};

inline Eigen::MatrixXd env_hamiltonian(const Chain& c) {
    const auto d = Eigen::Index{1} << c.n;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (int l = 1; l <= c.n; ++l) h += c.bx * site_op(sx(), l, c.n);
    for (auto [s, v] : c.defects) h += v * site_op(sz(), s, c.n);
    for (int l = 1; l < c.n; ++l) h += c.jz * site_op(sz(), l, c.n) * site_op(sz(), l + 1, c.n);
    if (c.periodic && c.n > 2) h += c.jz * site_op(sz(), c.n, c.n) * site_op(sz(), 1, c.n);
    return h;
}

inline Eigen::MatrixXcd propagator(const Eigen::MatrixXd& h, double t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    Eigen::VectorXcd ph(es.eigenvalues().size());
    for (Eigen::Index k = 0; k < ph.size(); ++k) ph[k] = std::exp(std::complex<double>(0, -es.eigenvalues()[k] * t));
    const Eigen::MatrixXcd q = es.eigenvectors().cast<std::complex<double>>();
    return q * ph.asDiagonal() * q.adjoint();
}

// Trace over the environment of |psi><psi| with psi indexed alpha * env_dim + i.
inline Eigen::MatrixXcd partial_trace(const Eigen::VectorXcd& psi, Eigen::Index m) {
    const Eigen::Index d = psi.size() / m;
    const Eigen::MatrixXcd full = psi * psi.adjoint();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            for (Eigen::Index i = 0; i < d; ++i) rho(a, b) += full(a * d + i, b * d + i);
    return rho;
}

inline Eigen::MatrixXd random_symmetric(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) a(r, c) = g(rng);
    return 0.5 * (a + a.transpose());
}

inline Eigen::VectorXcd random_state(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXcd v(n);
    for (Eigen::Index k = 0; k < n; ++k) v[k] = {g(rng), g(rng)};
    return v.normalized();
}

}  // namespace oracle
