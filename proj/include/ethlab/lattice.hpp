#pragma once

// Model builders over the product spin basis.
//
// Basis convention, used everywhere in the library:
//   environment index i: bit (l-1) of i is spin l, bit value 1 means S^z = +1/2;
//   total index = alpha * 2^N + i, alpha labelling qubit levels by increasing energy.
// Spin operators are Pauli matrices divided by two.

#include "ethlab/sparse.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace ethlab {

struct Defect {
    int site = 1;  // 1-based
    double strength = 0.0;
};

struct ChainConfig {
    int n_sites = 12;
    double b_x = 0.9;
    double j_z = 1.0;
    std::vector<Defect> defects{{1, 1.11}, {5, 0.6}};
    bool periodic = true;

    std::size_t dim() const { return std::size_t{1} << n_sites; }
    void validate() const;
};

enum class Axis { X, Z };
enum class QubitOp { X, Z, XPlusZ };
enum class InteractionKind { SxSx, SxPlusSzSx, Generic };

struct InteractionTerm {
    double lambda = 1.0;  // relative weight lambda_nu
    QubitOp qubit_op = QubitOp::X;
    int site = 1;
    Axis axis = Axis::X;
};

struct CouplingConfig {
    double q_s = 0.05;
    double lambda = 0.0;
    int coupling_site = 7;
    InteractionKind kind = InteractionKind::SxSx;
    std::vector<InteractionTerm> terms;  // used only by Generic

    void validate(const ChainConfig& chain) const;
};

// One product term strength * (qubit ⊗ env).
struct InteractionPart {
    double strength = 0.0;
    Eigen::Matrix2d qubit;
    SparseHamiltonian env;
};

Eigen::Matrix2d qubit_operator(QubitOp op);

SparseHamiltonian build_env_hamiltonian(const ChainConfig& cfg);
Eigen::Matrix2d build_qubit_hamiltonian(const CouplingConfig& cfg);
std::vector<InteractionPart> build_interaction(const CouplingConfig& cfg, const ChainConfig& chain);
SparseHamiltonian build_total_hamiltonian(const ChainConfig& chain, const CouplingConfig& coupling);

// Same as above, reusing an already built environment Hamiltonian.
SparseHamiltonian build_total_hamiltonian(const ChainConfig& chain, const CouplingConfig& coupling,
                                          const SparseHamiltonian& h_env);

SparseHamiltonian local_observable(int site, Axis axis, int n_sites);

std::string to_string(InteractionKind kind);
std::string to_string(Axis axis);
std::string to_string(QubitOp op);
InteractionKind interaction_kind_from_string(const std::string& s);
Axis axis_from_string(const std::string& s);
QubitOp qubit_op_from_string(const std::string& s);

}  // namespace ethlab
