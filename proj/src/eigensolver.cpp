#include "ethlab/eigensolver.hpp"

#include "ethlab/errors.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace ethlab {

namespace {

void require_symmetric(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("eigh: matrix is not square");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) throw std::invalid_argument("eigh: input is not symmetric (defect " + std::to_string(asym) + ")");
}

// Reduces a to tridiagonal form in place and returns the accumulated
// orthogonal transform; d/e receive the diagonal and the sub-diagonal
// (e[i] couples i and i+1, e[n-1] = 0).
Eigen::MatrixXd householder_tridiagonalize(Eigen::MatrixXd a, Eigen::VectorXd& d, Eigen::VectorXd& e, bool want_q) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd q = want_q ? Eigen::MatrixXd::Identity(n, n) : Eigen::MatrixXd();
    for (Eigen::Index k = 0; k + 2 < n; ++k) {
        const Eigen::Index m = n - k - 1;
        Eigen::VectorXd v = a.col(k).segment(k + 1, m);
        const double tail = v.tail(m - 1).squaredNorm();
        if (tail == 0.0) continue;
        const double xnorm = std::sqrt(v[0] * v[0] + tail);
        const double alpha = v[0] > 0 ? -xnorm : xnorm;
        v[0] -= alpha;
        v /= v.norm();

        auto b = a.block(k + 1, k + 1, m, m);
        const Eigen::VectorXd p = 2.0 * (b.selfadjointView<Eigen::Lower>() * v);
        const Eigen::VectorXd w = p - v.dot(p) * v;
        b.triangularView<Eigen::Lower>() -= v * w.transpose() + w * v.transpose();

        a(k + 1, k) = alpha;
        a.col(k).segment(k + 2, m - 1).setZero();
        if (want_q) {
            auto qr = q.rightCols(m);
            const Eigen::VectorXd qv = qr * v;
            qr.noalias() -= 2.0 * qv * v.transpose();
        }
    }
    d = a.diagonal();
    e = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) e[i] = a(i + 1, i);
    return q;
}

// Implicit-shift QL on a symmetric tridiagonal matrix; rotations are applied to
// the columns of z when z is non-empty.
void tridiagonal_ql(Eigen::VectorXd& d, Eigen::VectorXd& e, Eigen::MatrixXd& z) {
    const Eigen::Index n = d.size();
    const bool vectors = z.size() > 0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (Eigen::Index l = 0; l < n; ++l) {
        int iter = 0;
        Eigen::Index m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) break;
            }
            if (m == l) break;
            if (++iter > 60) throw NumericalError("tridiagonal QL did not converge");
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
            double s = 1.0, c = 1.0, p = 0.0;
            bool underflow = false;
            for (Eigen::Index i = m - 1; i >= l; --i) {
                const double f = s * e[i];
                const double b = c * e[i];
                r = std::hypot(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if (vectors) {
                    const Eigen::VectorXd zi = z.col(i);
                    const Eigen::VectorXd zi1 = z.col(i + 1);
                    z.col(i + 1) = s * zi + c * zi1;
                    z.col(i) = c * zi - s * zi1;
                }
            }
            if (underflow) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        } while (m != l);
    }
}

void sort_ascending(Eigen::VectorXd& w, Eigen::MatrixXd* z) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(w.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return w[a] < w[b]; });
    Eigen::VectorXd ws(w.size());
    for (Eigen::Index k = 0; k < w.size(); ++k) ws[k] = w[idx[static_cast<std::size_t>(k)]];
    w = ws;
    if (z && z->size() > 0) {
        Eigen::MatrixXd zs(z->rows(), z->cols());
        for (Eigen::Index k = 0; k < w.size(); ++k) zs.col(k) = z->col(idx[static_cast<std::size_t>(k)]);
        *z = std::move(zs);
    }
}

// Fixes the sign of each column so its largest-magnitude entry is positive,
// which makes decompositions comparable across backends.
void canonical_signs(Eigen::MatrixXd& z) {
    for (Eigen::Index k = 0; k < z.cols(); ++k) {
        Eigen::Index r;
        z.col(k).cwiseAbs().maxCoeff(&r);
        if (z(r, k) < 0) z.col(k) *= -1.0;
    }
}

EigenDecomposition lapack_eigh(const Eigen::MatrixXd& a, bool vectors) {
    const lapack_int n = static_cast<lapack_int>(a.rows());
    Eigen::MatrixXd work = a;
    Eigen::VectorXd w(n);
    Eigen::MatrixXd z = vectors ? Eigen::MatrixXd(n, n) : Eigen::MatrixXd(1, 1);
    std::vector<lapack_int> isuppz(static_cast<std::size_t>(2 * std::max<lapack_int>(n, 1)));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'A', 'L', n, work.data(), n, 0.0, 0.0,
                                           0, 0, 0.0, &found, w.data(), z.data(), vectors ? n : 1, isuppz.data());
    if (info != 0) throw NumericalError("LAPACKE_dsyevr failed with info=" + std::to_string(info));
    EigenDecomposition out;
    out.energies = std::move(w);
    if (vectors) out.vectors = std::move(z);
    return out;
}

}  // namespace

EigenDecomposition eigh(const Eigen::MatrixXd& a, EigBackend backend) {
    require_symmetric(a);
    EigenDecomposition out;
    if (a.rows() == 0) return out;
    if (backend == EigBackend::Lapack) {
        out = lapack_eigh(a, true);
    } else {
        Eigen::VectorXd d, e;
        Eigen::MatrixXd q = householder_tridiagonalize(a, d, e, true);
        tridiagonal_ql(d, e, q);
        out.energies = std::move(d);
        out.vectors = std::move(q);
    }
    sort_ascending(out.energies, &out.vectors);
    canonical_signs(out.vectors);
    return out;
}

Eigen::VectorXd eigvalsh(const Eigen::MatrixXd& a, EigBackend backend) {
    require_symmetric(a);
    if (a.rows() == 0) return {};
    Eigen::VectorXd w;
    if (backend == EigBackend::Lapack) {
        w = lapack_eigh(a, false).energies;
    } else {
        Eigen::VectorXd e;
        Eigen::MatrixXd none;
        householder_tridiagonalize(a, w, e, false);
        tridiagonal_ql(w, e, none);
    }
    sort_ascending(w, nullptr);
    return w;
}

double orthogonality_defect(const Eigen::MatrixXd& q) {
    const Eigen::MatrixXd g = q.transpose() * q - Eigen::MatrixXd::Identity(q.cols(), q.cols());
    return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
}

double reconstruction_residual(const Eigen::MatrixXd& a, const EigenDecomposition& eig) {
    const Eigen::MatrixXd r = a * eig.vectors - eig.vectors * eig.energies.asDiagonal();
    return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace ethlab
