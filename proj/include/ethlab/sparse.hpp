#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ethlab {

using cplx = std::complex<double>;

struct Triplet {
    std::uint32_t row;
    std::uint32_t col;
    double value;
};

// Real symmetric matrix in compressed-row layout. Column indices are sorted
// within each row and duplicate entries are merged on construction.
struct SparseHamiltonian {
    std::size_t dim = 0;
    std::vector<std::size_t> row_offsets;    // dim + 1 entries
    std::vector<std::uint32_t> col_indices;
    std::vector<double> values;

    static SparseHamiltonian from_triplets(std::size_t dim, std::vector<Triplet> triplets);
    static SparseHamiltonian identity(std::size_t dim);

    std::size_t nnz() const noexcept { return values.size(); }
    double at(std::size_t row, std::size_t col) const;
    double trace() const;

    // Largest |A(r,c) - A(c,r)| over stored entries; a missing mirror counts as zero.
    double symmetry_defect() const;
    bool is_symmetric(double tol = 1e-14) const { return symmetry_defect() <= tol; }

    Eigen::MatrixXd to_dense() const;
    std::vector<Triplet> to_triplets() const;
};

// a*A + b*B, both of the same dimension.
SparseHamiltonian linear_combination(double a, const SparseHamiltonian& lhs, double b,
                                     const SparseHamiltonian& rhs);

// small ⊗ big, with the small (system) factor on the slow index.
SparseHamiltonian kron(const Eigen::MatrixXd& small, const SparseHamiltonian& big);

void matvec(const SparseHamiltonian& h, std::span<const cplx> in, std::span<cplx> out);
Eigen::VectorXcd matvec(const SparseHamiltonian& h, const Eigen::VectorXcd& v);
Eigen::VectorXd matvec(const SparseHamiltonian& h, const Eigen::VectorXd& v);

// <a|H|b> for complex vectors.
cplx sandwich(const Eigen::VectorXcd& a, const SparseHamiltonian& h, const Eigen::VectorXcd& b);

}  // namespace ethlab
