#pragma once

#include "ethlab/dynamics.hpp"
#include "ethlab/eigensolver.hpp"
#include "ethlab/sparse.hpp"

#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace ethlab {

struct RenormTerm {
    double lambda = 0.0;  // effective strength of the term
    double h0 = 0.0;      // smoothed diagonal function of its environment part at e0
    Eigen::MatrixXd h_is;
};

struct RenormalizedHamiltonian {
    Eigen::MatrixXd h_tilde;  // H^S + sum lambda_nu h0_nu H^IS_nu
    Eigen::VectorXd energies;
    Eigen::MatrixXd basis;    // columns: preferred-basis candidates
};

RenormalizedHamiltonian renormalized_hamiltonian(const Eigen::MatrixXd& h_s, const std::vector<RenormTerm>& terms);

struct CommutatorResidual {
    double absolute = 0.0;    // ||[H, rho]||_F
    double normalized = 0.0;  // divided by ||H||_F ||rho||_F
};

CommutatorResidual commutator_residual(const Eigen::MatrixXd& h, const Rdm& rho);

struct Eta {
    double d = 0.0;
    double r = 0.0;
};

// Two-level coefficients relative to the gap e_2 - e_1 of a diagonal H^S.
Eta eta_coefficients(const Eigen::MatrixXd& h_is, const Eigen::MatrixXd& h_s);

struct TlsPrediction {
    std::complex<double> rho12;
    double denominator = 1.0;  // 1 - lambda eta_d h0
    bool pole = false;
};

TlsPrediction tls_prediction(const Eta& eta, double lambda, double h0, double rho11, double rho22);

// |H12 rho21 - rho12 H21|
double realness_residual(const Rdm& rho, const Eigen::MatrixXd& h_is);

struct H1Result {
    double h1 = 0.0;
    std::size_t degenerate_blocks = 0;  // blocks where the block-sum variant was used
};

// sum_i |c_i|^2 (H^IE)_ii over the support of c (environment eigenbasis);
// within levels closer than 1e-12 the full block sum over c_i^* c_j (H^IE)_ij
// is used instead.
H1Result h1_weighted(const EigenDecomposition& env_eig, const SparseHamiltonian& h_ie, const Eigen::VectorXcd& c);
double h1_weighted(const Eigen::VectorXd& diag, const Eigen::VectorXcd& c);

// First-order steady RDM: diagonal |c0a|^2, off-diagonal
// lambda H^IS_ab h1 (|c0b|^2 - |c0a|^2) / (e_b - e_a).
Eigen::MatrixXcd weak_coupling_prediction(double lambda, const Eigen::MatrixXd& h_is, const Eigen::VectorXd& levels,
                                          double h1, const Eigen::VectorXcd& c0);

struct ScanResult {
    std::optional<double> value;
    std::string reason;  // why value is absent, or how it was bracketed
    std::optional<double> lambda_lo;  // bracketing grid points
    std::optional<double> lambda_hi;
};

// First lambda at which y(lambda) reaches threshold, interpolated linearly in
// log(lambda). Absent when y starts at or above the threshold or never reaches it.
ScanResult first_crossing(const std::vector<std::pair<double, double>>& points, double threshold);

inline ScanResult lambda_h_scan(const std::vector<std::pair<double, double>>& ratio_vs_lambda, double eps_h) {
    return first_crossing(ratio_vs_lambda, eps_h);
}

struct PredictionReport {
    double lambda = 0.0;
    std::complex<double> rho12_measured;
    std::complex<double> rho12_tls;
    std::complex<double> rho12_weak;
    double rho11 = 0.0;
    double rho22 = 0.0;
    double commutator_residual = 0.0;       // normalized, against the renormalized Hamiltonian
    double commutator_residual_bare = 0.0;  // normalized, against H^S
    double realness_residual = 0.0;
    double ratio_delta_h = 0.0;
    double h0 = 0.0;
    double h1 = 0.0;
    double eta_d = 0.0;
    double eta_r = 0.0;
    double rel_error_tls = 0.0;
    double rel_error_weak = 0.0;
    bool tls_pole = false;
    std::string measured_source;
};

ScanResult lambda_c_scan(const std::vector<PredictionReport>& sweep, double eps_c);

}  // namespace ethlab
