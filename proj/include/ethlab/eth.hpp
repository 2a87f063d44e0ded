#pragma once

#include "ethlab/eigensolver.hpp"
#include "ethlab/shell.hpp"
#include "ethlab/sparse.hpp"

#include <cstddef>
#include <vector>

namespace ethlab {

// Which eigenstate pairs (i < j) are sampled for off-diagonal elements.
enum class PairRule {
    BothInShell,  // e_i and e_j inside the shell
    MeanInShell,  // (e_i + e_j)/2 inside the shell, |e_j - e_i| <= omega_max
};

struct OffDiagSample {
    std::size_t i = 0;
    std::size_t j = 0;  // j > i, so omega = e_j - e_i >= 0
    double e_i = 0.0;
    double e_j = 0.0;
    double value = 0.0;
};

struct MatrixElements {
    Eigen::VectorXd energies;  // environment levels, ascending
    Eigen::VectorXd diag;      // (O)_ii for every level
    std::vector<OffDiagSample> offdiag;
    ShellSpec shell;
    PairRule rule = PairRule::BothInShell;
};

MatrixElements observable_in_eigenbasis(const EigenDecomposition& eig, const SparseHamiltonian& op,
                                        const ShellSpec& shell, PairRule rule = PairRule::BothInShell,
                                        double omega_max = 4.0);

// Smoothed diagonal function, one point per level: h(e_i) is the mean of all
// diagonal elements whose per-site energy lies within window_width/2 of e_i/N.
// Values between levels come from linear interpolation, clamped at the ends.
struct HCurve {
    std::vector<double> e;
    std::vector<double> h;

    double operator()(double x) const;
};

HCurve smoothed_h(const MatrixElements& elements, int n_sites, double window_width = 0.01);

struct DeltaH {
    double h0 = 0.0;
    double delta_h = 0.0;      // from the smoothed curve
    double ratio = 0.0;        // |delta_h / h0|
    double delta_h_raw = 0.0;  // from raw diagonal elements
    double ratio_raw = 0.0;
    bool applicable = true;    // false when h0 vanishes
    std::size_t n_levels = 0;
};

// h0 = h(e0); delta_h = max of |h(e) - h0| over [e0 - delta_e/2, e0 + delta_e/2].
// The raw columns use the unsmoothed elements instead.
DeltaH delta_h_ratio(const HCurve& curve, double e0, double delta_e, const MatrixElements* raw = nullptr);

struct FluctuationStats {
    double mu = 0.0;
    double sigma_d = 0.0;
    double sigma_nd = 0.0;
    double gauss_stat_d = 0.0;
    double gauss_stat_nd = 0.0;
    std::size_t n_diag = 0;
    std::size_t n_offdiag = 0;
};

// Requires at least min_levels levels inside the shell.
FluctuationStats fluctuation_stats(const MatrixElements& elements, const ShellSpec& shell,
                                   std::size_t min_levels = 50);

// L1 distance between the histogram of standardized samples and the unit
// normal, as a sum of per-bin mass differences over [-range, range].
double gaussian_l1_distance(const std::vector<double>& samples, int n_bins = 40, double range = 4.0);

// Gaussianity of diagonal fluctuations measured as deviations from the
// smoothed curve over a central fraction of the spectrum; a narrow shell holds
// too few levels for a 40-bin histogram to resolve anything below its own
// sampling noise.
double diagonal_deviation_gaussianity(const MatrixElements& elements, const HCurve& curve, double fraction_lo = 0.25,
                                      double fraction_hi = 0.75);

struct GBin {
    double omega = 0.0;  // bin centre
    double mean_g2 = 0.0;
    std::size_t count = 0;
};

std::vector<GBin> g_profile(const MatrixElements& elements, const ShellSpec& shell, double omega_bin);

// Largest bin mean of |O_ij|^2 over bins holding at least min_count pairs.
double g2_max(const std::vector<GBin>& profile, std::size_t min_count = 10);

}  // namespace ethlab
