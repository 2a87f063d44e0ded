#include "ethlab/sparse.hpp"

#include "ethlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ethlab {

SparseHamiltonian SparseHamiltonian::from_triplets(std::size_t dim, std::vector<Triplet> triplets) {
    for (const auto& t : triplets) {
        if (t.row >= dim || t.col >= dim) {
            throw std::out_of_range("triplet index outside matrix of dimension " + std::to_string(dim));
        }
    }
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseHamiltonian h;
    h.dim = dim;
    h.row_offsets.assign(dim + 1, 0);
    h.col_indices.reserve(triplets.size());
    h.values.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size();) {
        const auto r = triplets[k].row;
        const auto c = triplets[k].col;
        double v = 0.0;
        while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) v += triplets[k++].value;
        // Exact cancellations are dropped so the pattern stays minimal.
        if (v == 0.0) continue;
        h.col_indices.push_back(c);
        h.values.push_back(v);
        ++h.row_offsets[r + 1];
    }
    for (std::size_t r = 0; r < dim; ++r) h.row_offsets[r + 1] += h.row_offsets[r];
    return h;
}

SparseHamiltonian SparseHamiltonian::identity(std::size_t dim) {
    std::vector<Triplet> t;
    t.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) t.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), 1.0});
    return from_triplets(dim, std::move(t));
}

double SparseHamiltonian::at(std::size_t row, std::size_t col) const {
    if (row >= dim || col >= dim) throw std::out_of_range("sparse index out of range");
    const auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[row]);
    const auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[row + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
    if (it == last || *it != col) return 0.0;
    return values[static_cast<std::size_t>(it - col_indices.begin())];
}

double SparseHamiltonian::trace() const {
    double t = 0.0;
    for (std::size_t r = 0; r < dim; ++r) t += at(r, r);
    return t;
}

double SparseHamiltonian::symmetry_defect() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            const std::size_t c = col_indices[k];
            if (c <= r) continue;
            worst = std::max(worst, std::abs(values[k] - at(c, r)));
        }
        // entries below the diagonal whose mirror is missing
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            const std::size_t c = col_indices[k];
            if (c >= r) break;
            if (at(c, r) == 0.0) worst = std::max(worst, std::abs(values[k]));
        }
    }
    return worst;
}

Eigen::MatrixXd SparseHamiltonian::to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
            m(static_cast<Eigen::Index>(r), col_indices[k]) = values[k];
    return m;
}

std::vector<Triplet> SparseHamiltonian::to_triplets() const {
    std::vector<Triplet> t;
    t.reserve(nnz());
    for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
            t.push_back({static_cast<std::uint32_t>(r), col_indices[k], values[k]});
    return t;
}

SparseHamiltonian linear_combination(double a, const SparseHamiltonian& lhs, double b,
                                     const SparseHamiltonian& rhs) {
    if (lhs.dim != rhs.dim) throw std::invalid_argument("linear_combination: dimension mismatch");
    auto t = lhs.to_triplets();
    for (auto& x : t) x.value *= a;
    for (auto x : rhs.to_triplets()) {
        x.value *= b;
        t.push_back(x);
    }
    return SparseHamiltonian::from_triplets(lhs.dim, std::move(t));
}

SparseHamiltonian kron(const Eigen::MatrixXd& small, const SparseHamiltonian& big) {
    if (small.rows() != small.cols()) throw std::invalid_argument("kron: system factor must be square");
    const std::size_t m = static_cast<std::size_t>(small.rows());
    const std::size_t d = big.dim;
    std::vector<Triplet> t;
    t.reserve(big.nnz() * m * m);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
            const double s = small(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            if (s == 0.0) continue;
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t k = big.row_offsets[r]; k < big.row_offsets[r + 1]; ++k)
                    t.push_back({static_cast<std::uint32_t>(a * d + r),
                                 static_cast<std::uint32_t>(b * d + big.col_indices[k]), s * big.values[k]});
        }
    }
    return SparseHamiltonian::from_triplets(m * d, std::move(t));
}

void matvec(const SparseHamiltonian& h, std::span<const cplx> in, std::span<cplx> out) {
    if (in.size() != h.dim || out.size() != h.dim) {
        throw std::invalid_argument("matvec: vector length " + std::to_string(in.size()) + " does not match dim " +
                                    std::to_string(h.dim));
    }
    for (std::size_t r = 0; r < h.dim; ++r) {
        cplx acc = 0.0;
        for (std::size_t k = h.row_offsets[r]; k < h.row_offsets[r + 1]; ++k) acc += h.values[k] * in[h.col_indices[k]];
        out[r] = acc;
    }
}

Eigen::VectorXcd matvec(const SparseHamiltonian& h, const Eigen::VectorXcd& v) {
    Eigen::VectorXcd out(v.size());
    matvec(h, std::span<const cplx>(v.data(), static_cast<std::size_t>(v.size())),
           std::span<cplx>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

Eigen::VectorXd matvec(const SparseHamiltonian& h, const Eigen::VectorXd& v) {
    if (static_cast<std::size_t>(v.size()) != h.dim) throw std::invalid_argument("matvec: dimension mismatch");
    Eigen::VectorXd out(v.size());
    for (std::size_t r = 0; r < h.dim; ++r) {
        double acc = 0.0;
        for (std::size_t k = h.row_offsets[r]; k < h.row_offsets[r + 1]; ++k) acc += h.values[k] * v[h.col_indices[k]];
        out[static_cast<Eigen::Index>(r)] = acc;
    }
    return out;
}

cplx sandwich(const Eigen::VectorXcd& a, const SparseHamiltonian& h, const Eigen::VectorXcd& b) {
    return a.dot(matvec(h, b));
}

}  // namespace ethlab
