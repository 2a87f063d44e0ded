#pragma once

#include "ethlab/eigensolver.hpp"
#include "ethlab/krylov.hpp"
#include "ethlab/lattice.hpp"
#include "ethlab/shell.hpp"
#include "ethlab/sparse.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace ethlab {

using Rdm = Eigen::MatrixXcd;

struct WaveFunction {
    Eigen::VectorXcd amplitudes;  // total basis, index alpha * env_dim + i
    std::size_t env_dim = 0;
    double time = 0.0;

    int levels() const { return env_dim ? static_cast<int>(amplitudes.size() / static_cast<Eigen::Index>(env_dim)) : 0; }
};

enum class StateKind {
    RandomPhase,      // equal moduli, independent uniform phases
    ComplexGaussian,  // i.i.d. standard complex normal coefficients
};

struct ShellState {
    Eigen::VectorXcd coefficients;  // c_0i in the environment eigenbasis
    Eigen::VectorXcd vector;        // same state in the product basis
    std::vector<std::size_t> support;
};

// Platform-independent draws from a 64-bit Mersenne twister.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed);
    double uniform();                 // [0, 1)
    std::complex<double> complex_normal();  // E|z|^2 = 1
private:
    std::mt19937_64 engine_;  // output sequence is fixed by the standard
};

ShellState sample_shell_state(const EigenDecomposition& env_eig, const ShellSpec& shell, std::uint64_t seed,
                              StateKind kind = StateKind::RandomPhase);

// Rescales c0 to unit norm; rejects the zero vector.
Eigen::VectorXcd normalized(const Eigen::VectorXcd& c0);

// Product state c0 ⊗ env. Both inputs must already be normalized (1e-10).
WaveFunction build_initial_state(const Eigen::VectorXcd& c0, const Eigen::VectorXcd& env_state);

WaveFunction propagate(const SparseHamiltonian& h, const WaveFunction& psi, double dt, int krylov_dim = 30);

struct Branches {
    std::vector<Eigen::VectorXcd> b;
    double time = 0.0;
};

Branches extract_branches(const WaveFunction& psi);
Eigen::VectorXcd reassemble(const Branches& b);
Rdm rdm_from_branches(const Branches& b);  // rho_ab = <E_b|E_a>
Eigen::MatrixXcd f_operator(const Branches& b, const SparseHamiltonian& h_ie);  // F_ab = <E_a|H^IE|E_b>

struct RdmCheck {
    double hermiticity = 0.0;    // max |rho - rho^dagger|
    double trace_error = 0.0;    // |tr rho - 1|
    double min_eigenvalue = 0.0;
    bool ok = true;
};

RdmCheck check_rdm(const Rdm& rho, double herm_tol = 1e-12, double trace_tol = 1e-10, double pos_tol = -1e-10);

double energy(const SparseHamiltonian& h, const WaveFunction& psi);

// Sum over interaction terms of strength * [H^IS, F^T], with F built from each
// term's environment part.
Eigen::MatrixXcd interaction_commutator(const Branches& b, const std::vector<InteractionPart>& parts);

// d rho / dt from the branches: -i([H^S, rho] + sum_nu lambda_nu [H^IS_nu, F_nu^T]).
Eigen::MatrixXcd drho_dt_rhs(const Branches& b, const Eigen::Matrix2d& h_s, const std::vector<InteractionPart>& parts);

// ||[H^S, rho] + lambda [H^IS, F^T]||_F.
double stationarity_residual(const Rdm& rho_bar, const Eigen::MatrixXcd& f_bar, const Eigen::MatrixXd& h_s,
                             const Eigen::MatrixXd& h_is, double lambda);

struct Sample {
    double time = 0.0;
    Rdm rho;
    Eigen::MatrixXcd f;
    std::vector<double> branch_norms;
    double energy = 0.0;
    RdmCheck check;
};

struct TimeAverageOptions {
    double t_min = 0.0;
    double t_max = 5000.0;
    double dt_sample = 1.0;
    double step = 0.5;  // propagation step between samples
    KrylovOptions krylov;
    double convergence_tol = 5e-3;
};

struct ConvergenceReport {
    double window_difference = 0.0;  // max |mean(first half) - mean(full)| over rho entries
    bool converged = true;
    std::size_t n_samples = 0;
};

struct TimeAverage {
    Rdm rho;
    Eigen::MatrixXcd f;
    ConvergenceReport convergence;
    PropagationStats propagation;
    double max_norm_drift = 0.0;
    double max_energy_drift = 0.0;  // relative
    bool invariants_ok = true;
};

// Uniform samples t = t_min + k dt_sample up to t_max. The observer, when set,
// sees every sample in order.
TimeAverage time_average(const SparseHamiltonian& h, const WaveFunction& psi0, const SparseHamiltonian& h_ie,
                         const TimeAverageOptions& options,
                         const std::function<void(const Sample&)>& observer = {});

struct DiagonalEnsemble {
    Rdm rho;
    Eigen::MatrixXcd f;              // empty unless h_ie was given
    Eigen::VectorXd populations;     // |<n|psi0>|^2
    double min_gap = 0.0;
};

// Infinite-time averages from the total eigendecomposition. Rejects spectra
// with a gap below 1e-12, naming the offending pair.
DiagonalEnsemble diagonal_ensemble(const EigenDecomposition& total_eig, const WaveFunction& psi0,
                                   const SparseHamiltonian* h_ie = nullptr);

inline Rdm diagonal_ensemble_rdm(const EigenDecomposition& total_eig, const WaveFunction& psi0) {
    return diagonal_ensemble(total_eig, psi0).rho;
}

}  // namespace ethlab
