#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace ethlab {

struct SpectralOptions {
    double fraction_lo = 0.25;  // central half of the spectrum by default
    double fraction_hi = 0.75;
    int unfold_window = 20;     // levels in the moving-average local spacing
    int n_bins = 20;
    double s_max = 4.0;
    std::size_t min_levels = 100;
};

struct SpectralStats {
    std::vector<double> bin_edges;
    std::vector<double> densities;  // integrates to 1 over [0, s_max]
    std::vector<double> spacings;   // unfolded
    double mean_r = 0.0;
    double fraction_lo = 0.0;
    double fraction_hi = 1.0;
    std::size_t n_levels = 0;       // levels inside the window
};

// Throws ConfigError("too few levels ...") when the window holds fewer than
// options.min_levels levels.
SpectralStats spacing_statistics(const Eigen::VectorXd& energies, const SpectralOptions& options = {});

double wigner_dyson_pdf(double s);
double wigner_dyson_cdf(double s);

// Sum over bins of |histogram mass - Wigner-Dyson mass|, i.e. the L1 distance
// between the binned distributions on [0, s_max].
double wigner_dyson_distance(const SpectralStats& stats);

}  // namespace ethlab
