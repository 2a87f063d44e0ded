#include "ethlab/eth.hpp"

#include "ethlab/errors.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace ethlab {

namespace {

Eigen::SparseMatrix<double, Eigen::RowMajor> to_eigen(const SparseHamiltonian& op) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(op.nnz());
    for (const auto& x : op.to_triplets()) t.emplace_back(x.row, x.col, x.value);
    Eigen::SparseMatrix<double, Eigen::RowMajor> s(static_cast<Eigen::Index>(op.dim), static_cast<Eigen::Index>(op.dim));
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

// Contiguous index range [first, last) of ascending energies inside [lo, hi].
std::pair<Eigen::Index, Eigen::Index> level_range(const Eigen::VectorXd& e, double lo, double hi) {
    const double* b = e.data();
    const double* end = b + e.size();
    return {std::lower_bound(b, end, lo) - b, std::upper_bound(b, end, hi) - b};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

bool pair_selected(const OffDiagSample& s, const ShellSpec& shell, PairRule rule) {
    if (rule == PairRule::BothInShell) return shell.contains(s.e_i) && shell.contains(s.e_j);
    return shell.contains(0.5 * (s.e_i + s.e_j));
}

}  // namespace

MatrixElements observable_in_eigenbasis(const EigenDecomposition& eig, const SparseHamiltonian& op,
                                        const ShellSpec& shell, PairRule rule, double omega_max) {
    if (op.dim != eig.dim())
        throw std::invalid_argument("observable dimension " + std::to_string(op.dim) + " does not match eigenbasis " +
                                    std::to_string(eig.dim()));
    shell.validate();
    MatrixElements out;
    out.energies = eig.energies;
    out.shell = shell;
    out.rule = rule;

    const Eigen::MatrixXd oq = to_eigen(op) * eig.vectors;
    out.diag = eig.vectors.cwiseProduct(oq).colwise().sum().transpose();

    const double pad = rule == PairRule::MeanInShell ? 0.5 * omega_max : 0.0;
    const auto [first, last] = level_range(eig.energies, shell.lo() - pad, shell.hi() + pad);
    const Eigen::Index count = last - first;
    if (count < 2) return out;
    const Eigen::MatrixXd block = eig.vectors.middleCols(first, count).transpose() * oq.middleCols(first, count);
    for (Eigen::Index a = 0; a < count; ++a) {
        for (Eigen::Index b = a + 1; b < count; ++b) {
            OffDiagSample s{static_cast<std::size_t>(first + a), static_cast<std::size_t>(first + b),
                            eig.energies[first + a], eig.energies[first + b], 0.5 * (block(a, b) + block(b, a))};
            if (rule == PairRule::MeanInShell && s.e_j - s.e_i > omega_max) continue;
            if (!pair_selected(s, shell, rule)) continue;
            out.offdiag.push_back(s);
        }
    }
    return out;
}

double HCurve::operator()(double x) const {
    if (e.empty()) throw std::logic_error("empty h curve");
    if (x <= e.front()) return h.front();
    if (x >= e.back()) return h.back();
    const auto it = std::upper_bound(e.begin(), e.end(), x);
    const auto k = static_cast<std::size_t>(it - e.begin());
    const double x0 = e[k - 1], x1 = e[k];
    if (x1 == x0) return h[k];
    const double t = (x - x0) / (x1 - x0);
    return (1.0 - t) * h[k - 1] + t * h[k];
}

HCurve smoothed_h(const MatrixElements& el, int n_sites, double window_width) {
    if (!(window_width > 0.0)) throw ConfigError("smoothing window must be positive");
    if (n_sites < 1) throw ConfigError("n_sites must be positive");
    const Eigen::Index n = el.energies.size();
    const double half = 0.5 * window_width * n_sites;  // back to absolute energy
    HCurve c;
    c.e.resize(static_cast<std::size_t>(n));
    c.h.resize(static_cast<std::size_t>(n));
    // Sliding window over sorted energies; means are taken directly, not from a running sum.
    Eigen::Index lo = 0, hi = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ei = el.energies[i];
        while (hi < n && el.energies[hi] <= ei + half) ++hi;
        while (el.energies[lo] < ei - half) ++lo;
        c.e[static_cast<std::size_t>(i)] = ei;
        c.h[static_cast<std::size_t>(i)] = el.diag.segment(lo, hi - lo).mean();
    }
    return c;
}

DeltaH delta_h_ratio(const HCurve& curve, double e0, double delta_e, const MatrixElements* raw) {
    if (curve.e.empty()) throw ConfigError("empty h curve");
    if (!(delta_e >= 0.0)) throw ConfigError("shell width must be nonnegative");
    const double lo = e0 - 0.5 * delta_e, hi = e0 + 0.5 * delta_e;
    if (lo < curve.e.front() || hi > curve.e.back())
        throw ConfigError("shell [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is not inside the spectrum");

    DeltaH r;
    r.h0 = curve(e0);
    // The curve is piecewise linear, so its extremes on the window sit at nodes or at the ends.
    r.delta_h = std::max(std::abs(curve(lo) - r.h0), std::abs(curve(hi) - r.h0));
    for (std::size_t i = 0; i < curve.e.size(); ++i) {
        if (curve.e[i] < lo || curve.e[i] > hi) continue;
        r.delta_h = std::max(r.delta_h, std::abs(curve.h[i] - r.h0));
        ++r.n_levels;
    }
    if (raw) {
        for (Eigen::Index i = 0; i < raw->energies.size(); ++i)
            if (raw->energies[i] >= lo && raw->energies[i] <= hi)
                r.delta_h_raw = std::max(r.delta_h_raw, std::abs(raw->diag[i] - r.h0));
    }
    double scale = 0.0;
    for (double v : curve.h) scale = std::max(scale, std::abs(v));
    if (std::abs(r.h0) <= 1e-12 * std::max(scale, 1.0)) {
        r.applicable = false;
        r.ratio = r.ratio_raw = std::numeric_limits<double>::infinity();
    } else {
        r.ratio = std::abs(r.delta_h / r.h0);
        r.ratio_raw = std::abs(r.delta_h_raw / r.h0);
    }
    return r;
}

double gaussian_l1_distance(const std::vector<double>& x, int n_bins, double range) {
    if (x.empty() || n_bins < 1 || !(range > 0.0)) return 0.0;
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(x.size()));
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) return 0.0;

    const double width = 2.0 * range / n_bins;
    std::vector<double> counts(static_cast<std::size_t>(n_bins), 0.0);
    for (double v : x) {
        const double z = (v - mean) / sd;
        if (z < -range || z >= range) continue;
        const auto b = std::min<std::size_t>(static_cast<std::size_t>((z + range) / width), counts.size() - 1);
        counts[b] += 1.0;
    }
    double dist = 0.0;
    for (int b = 0; b < n_bins; ++b) {
        const double lo = -range + b * width;
        const double p = counts[static_cast<std::size_t>(b)] / static_cast<double>(x.size());
        dist += std::abs(p - (normal_cdf(lo + width) - normal_cdf(lo)));
    }
    return dist;
}

FluctuationStats fluctuation_stats(const MatrixElements& el, const ShellSpec& shell, std::size_t min_levels) {
    FluctuationStats st;
    std::vector<double> d;
    for (Eigen::Index i = 0; i < el.energies.size(); ++i)
        if (shell.contains(el.energies[i])) d.push_back(el.diag[i]);
    if (d.size() < min_levels)
        throw ConfigError("shell holds " + std::to_string(d.size()) + " levels, need at least " + std::to_string(min_levels));
    st.n_diag = d.size();
    for (double v : d) st.mu += v;
    st.mu /= static_cast<double>(d.size());
    double var = 0.0;
    for (double v : d) var += (v - st.mu) * (v - st.mu);
    st.sigma_d = std::sqrt(var / static_cast<double>(d.size()));

    std::vector<double> od;
    double sq = 0.0;
    for (const auto& s : el.offdiag) {
        if (!(shell.contains(s.e_i) && shell.contains(s.e_j))) continue;
        od.push_back(s.value);
        sq += s.value * s.value;
    }
    st.n_offdiag = od.size();
    st.sigma_nd = od.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(od.size()));
    // Rounding leaves sigma around 1e-16 for constant elements; treat that as zero spread.
    const double floor = 1e-12 * std::max(1.0, std::abs(st.mu));
    if (st.sigma_d <= floor) st.sigma_d = 0.0;
    if (st.sigma_nd <= 1e-12) st.sigma_nd = 0.0;
    st.gauss_stat_d = st.sigma_d > 0.0 ? gaussian_l1_distance(d) : 0.0;
    st.gauss_stat_nd = st.sigma_nd > 0.0 ? gaussian_l1_distance(od) : 0.0;
    return st;
}

double diagonal_deviation_gaussianity(const MatrixElements& el, const HCurve& curve, double fraction_lo,
                                      double fraction_hi) {
    const auto n = static_cast<double>(el.energies.size());
    const auto i0 = static_cast<Eigen::Index>(fraction_lo * n);
    const auto i1 = static_cast<Eigen::Index>(fraction_hi * n);
    std::vector<double> dev;
    for (Eigen::Index i = i0; i < i1; ++i) dev.push_back(el.diag[i] - curve(el.energies[i]));
    return gaussian_l1_distance(dev);
}

std::vector<GBin> g_profile(const MatrixElements& el, const ShellSpec& shell, double omega_bin) {
    if (!(omega_bin > 0.0)) throw ConfigError("omega bin width must be positive");
    std::vector<double> sum;
    std::vector<std::size_t> cnt;
    for (const auto& s : el.offdiag) {
        if (!pair_selected(s, shell, el.rule)) continue;
        const double omega = s.e_j - s.e_i;
        const auto b = static_cast<std::size_t>(omega / omega_bin);
        if (b >= sum.size()) {
            sum.resize(b + 1, 0.0);
            cnt.resize(b + 1, 0);
        }
        sum[b] += s.value * s.value;
        ++cnt[b];
    }
    std::vector<GBin> out;
    for (std::size_t b = 0; b < sum.size(); ++b)
        if (cnt[b] > 0) out.push_back({(static_cast<double>(b) + 0.5) * omega_bin, sum[b] / static_cast<double>(cnt[b]), cnt[b]});
    return out;
}

double g2_max(const std::vector<GBin>& profile, std::size_t min_count) {
    double m = 0.0;
    for (const auto& b : profile)
        if (b.count >= min_count) m = std::max(m, b.mean_g2);
    return m;
}

}  // namespace ethlab
