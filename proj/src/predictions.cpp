#include "ethlab/predictions.hpp"

#include "ethlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ethlab {

RenormalizedHamiltonian renormalized_hamiltonian(const Eigen::MatrixXd& h_s, const std::vector<RenormTerm>& terms) {
    RenormalizedHamiltonian r;
    r.h_tilde = h_s;
    for (const auto& t : terms) {
        if (!std::isfinite(t.h0)) throw ConfigError("renormalization needs a finite h0");
        if (t.h_is.rows() != h_s.rows() || t.h_is.cols() != h_s.cols()) throw std::invalid_argument("H^IS shape mismatch");
        r.h_tilde += t.lambda * t.h0 * t.h_is;
    }
    const auto eig = eigh(r.h_tilde);
    r.energies = eig.energies;
    r.basis = eig.vectors;
    return r;
}

CommutatorResidual commutator_residual(const Eigen::MatrixXd& h, const Rdm& rho) {
    const Eigen::MatrixXcd hc = h.cast<std::complex<double>>();
    CommutatorResidual c;
    c.absolute = (hc * rho - rho * hc).norm();
    const double scale = h.norm() * rho.norm();
    c.normalized = scale > 0.0 ? c.absolute / scale : 0.0;
    return c;
}

Eta eta_coefficients(const Eigen::MatrixXd& h_is, const Eigen::MatrixXd& h_s) {
    if (h_s.rows() != 2 || h_is.rows() != 2) throw ConfigError("eta coefficients are defined for a two-level system");
    if (std::abs(h_s(0, 1)) > 1e-14) throw ConfigError("H^S must be diagonal in the working basis");
    const double gap = h_s(1, 1) - h_s(0, 0);
    if (!(std::abs(gap) > 0.0)) throw ConfigError("eta coefficients need a nondegenerate H^S");
    return {(h_is(0, 0) - h_is(1, 1)) / gap, h_is(0, 1) / gap};
}

TlsPrediction tls_prediction(const Eta& eta, double lambda, double h0, double rho11, double rho22) {
    TlsPrediction p;
    p.denominator = 1.0 - lambda * eta.d * h0;
    p.pole = std::abs(p.denominator) < 1e-8;
    p.rho12 = lambda * eta.r * h0 * (rho22 - rho11) / p.denominator;
    return p;
}

double realness_residual(const Rdm& rho, const Eigen::MatrixXd& h_is) {
    return std::abs(h_is(0, 1) * rho(1, 0) - rho(0, 1) * h_is(1, 0));
}

double h1_weighted(const Eigen::VectorXd& diag, const Eigen::VectorXcd& c) {
    if (diag.size() != c.size()) throw std::invalid_argument("h1: length mismatch");
    return c.cwiseAbs2().dot(diag);
}

H1Result h1_weighted(const EigenDecomposition& env_eig, const SparseHamiltonian& h_ie, const Eigen::VectorXcd& c) {
    if (static_cast<std::size_t>(c.size()) != env_eig.dim() || h_ie.dim != env_eig.dim())
        throw std::invalid_argument("h1: dimension mismatch");
    H1Result r;
    const Eigen::Index n = c.size();
    std::complex<double> acc = 0.0;
    for (Eigen::Index i = 0; i < n;) {
        Eigen::Index j = i + 1;
        while (j < n && env_eig.energies[j] - env_eig.energies[j - 1] < 1e-12) ++j;
        bool touched = false;
        for (Eigen::Index k = i; k < j; ++k) touched = touched || c[k] != 0.0;
        if (touched) {
            const Eigen::MatrixXd v = env_eig.vectors.middleCols(i, j - i);
            Eigen::MatrixXd hv(v.rows(), v.cols());
            for (Eigen::Index k = 0; k < v.cols(); ++k) hv.col(k) = matvec(h_ie, Eigen::VectorXd(v.col(k)));
            const Eigen::MatrixXd block = v.transpose() * hv;
            const Eigen::VectorXcd cb = c.segment(i, j - i);
            acc += cb.dot(block.cast<std::complex<double>>() * cb);
            if (j - i > 1) ++r.degenerate_blocks;
        }
        i = j;
    }
    r.h1 = acc.real();
    return r;
}

Eigen::MatrixXcd weak_coupling_prediction(double lambda, const Eigen::MatrixXd& h_is, const Eigen::VectorXd& levels,
                                          double h1, const Eigen::VectorXcd& c0) {
    const Eigen::Index m = c0.size();
    if (h_is.rows() != m || levels.size() != m) throw std::invalid_argument("weak-coupling inputs differ in size");
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        rho(a, a) = std::norm(c0[a]);
        for (Eigen::Index b = 0; b < m; ++b) {
            if (a == b) continue;
            const double gap = levels[b] - levels[a];
            if (!(std::abs(gap) > 0.0)) throw ConfigError("weak-coupling formula needs nondegenerate levels");
            rho(a, b) = lambda * h_is(a, b) * h1 * (std::norm(c0[b]) - std::norm(c0[a])) / gap;
        }
    }
    return rho;
}

ScanResult first_crossing(const std::vector<std::pair<double, double>>& pts, double threshold) {
    ScanResult r;
    if (pts.empty()) {
        r.reason = "empty grid";
        return r;
    }
    for (std::size_t k = 1; k < pts.size(); ++k)
        if (!(pts[k].first > pts[k - 1].first)) throw ConfigError("lambda grid must be strictly ascending");
    if (pts.front().first <= 0.0) throw ConfigError("log-lambda interpolation needs positive lambda");
    if (pts.front().second >= threshold) {
        r.reason = "starts at or above threshold";
        r.lambda_hi = pts.front().first;
        return r;
    }
    for (std::size_t k = 1; k < pts.size(); ++k) {
        if (pts[k].second < threshold) continue;
        const double x0 = std::log(pts[k - 1].first), x1 = std::log(pts[k].first);
        const double y0 = pts[k - 1].second, y1 = pts[k].second;
        const double t = (threshold - y0) / (y1 - y0);
        r.value = std::exp(x0 + t * (x1 - x0));
        r.lambda_lo = pts[k - 1].first;
        r.lambda_hi = pts[k].first;
        std::ostringstream s;
        s << "log-linear between grid points " << pts[k - 1].first << " and " << pts[k].first;
        r.reason = s.str();
        return r;
    }
    r.reason = "never exceeds threshold";
    r.lambda_lo = pts.back().first;
    return r;
}

ScanResult lambda_c_scan(const std::vector<PredictionReport>& sweep, double eps_c) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : sweep) pts.emplace_back(p.lambda, p.rel_error_tls);
    return first_crossing(pts, eps_c);
}

}  // namespace ethlab
