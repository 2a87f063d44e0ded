#pragma once

#include "ethlab/dynamics.hpp"
#include "ethlab/eigensolver.hpp"
#include "ethlab/shell.hpp"

#include <string>
#include <vector>

namespace ethlab {

// Unperturbed product basis |alpha i> (qubit level times environment
// eigenstate) in total-index order, with its energies e_alpha + e_i.
struct UncoupledBasis {
    Eigen::VectorXd qubit_energies;  // ascending
    const EigenDecomposition* env = nullptr;
    Eigen::VectorXd energies;        // index alpha * env_dim + i

    UncoupledBasis(const Eigen::VectorXd& qubit_levels, const EigenDecomposition& env_eig);

    // Components C_{alpha i} of total eigenvector n in this basis.
    Eigen::VectorXd components(const EigenDecomposition& total_eig, std::size_t n) const;
};

// Smallest w such that the weights within |E_k - center| <= w/2 sum to at
// least 1 - epsilon.
double ef_width(const Eigen::VectorXd& weights, const Eigen::VectorXd& uncoupled_energies, double center, double epsilon);

double ef_width(const EigenDecomposition& total_eig, std::size_t n, const UncoupledBasis& basis, double epsilon);

struct StateWidth {
    std::size_t n = 0;
    double energy = 0.0;
    double population = 0.0;
    double width = 0.0;
};

struct EfWidthReport {
    std::vector<StateWidth> per_state;  // relevant set, by descending population
    double w_eps_max = 0.0;
    double epsilon = 0.05;
    std::string relevant_set_rule;
};

// Relevant states: the fewest eigenstates, taken by descending population,
// whose populations add up to at least 1 - epsilon.
EfWidthReport w_max(const EigenDecomposition& total_eig, const UncoupledBasis& basis, const WaveFunction& psi0,
                    double epsilon);

struct EffectiveRegion {
    double delta_e = 0.0;
    double delta_e0 = 0.0;
    double two_delta_s = 0.0;
    double w_eps_max = 0.0;
};

EffectiveRegion effective_region(const ShellSpec& shell, double delta_s, double w_eps_max);

Eigen::VectorXd populations(const EigenDecomposition& total_eig, const WaveFunction& psi0);
double participation(const EigenDecomposition& total_eig, const WaveFunction& psi0);
double participation(const Eigen::VectorXd& populations);

// 2 * g2_max / L0.
double fluctuation_bound(double g2_max_in_shell, double l0);

}  // namespace ethlab
