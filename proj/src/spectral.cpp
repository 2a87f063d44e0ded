#include "ethlab/spectral.hpp"

#include "ethlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ethlab {

SpectralStats spacing_statistics(const Eigen::VectorXd& energies, const SpectralOptions& opt) {
    if (!(opt.fraction_lo >= 0.0 && opt.fraction_lo < opt.fraction_hi && opt.fraction_hi <= 1.0))
        throw ConfigError("spectral window must satisfy 0 <= lo < hi <= 1");
    if (opt.n_bins < 1 || opt.s_max <= 0.0 || opt.unfold_window < 2) throw ConfigError("invalid histogram options");

    const auto n = static_cast<std::ptrdiff_t>(energies.size());
    const auto i0 = static_cast<std::ptrdiff_t>(opt.fraction_lo * static_cast<double>(n));
    const auto i1 = static_cast<std::ptrdiff_t>(opt.fraction_hi * static_cast<double>(n));
    if (i1 - i0 < static_cast<std::ptrdiff_t>(std::max<std::size_t>(opt.min_levels, 3))) {
        throw ConfigError("too few levels for spacing statistics: " + std::to_string(std::max<std::ptrdiff_t>(i1 - i0, 0)) +
                          " in window, need " + std::to_string(opt.min_levels));
    }

    SpectralStats st;
    st.fraction_lo = opt.fraction_lo;
    st.fraction_hi = opt.fraction_hi;
    st.n_levels = static_cast<std::size_t>(i1 - i0);

    const std::ptrdiff_t half = opt.unfold_window / 2;
    for (std::ptrdiff_t k = i0; k + 1 < i1; ++k) {
        const std::ptrdiff_t a = std::max<std::ptrdiff_t>(0, k - half);
        const std::ptrdiff_t b = std::min<std::ptrdiff_t>(n - 1, k + half);
        const double local = (energies[b] - energies[a]) / static_cast<double>(b - a);
        if (!(local > 0.0)) throw NumericalError("degenerate levels prevent unfolding near index " + std::to_string(k));
        st.spacings.push_back((energies[k + 1] - energies[k]) / local);
    }

    // Gap ratios need no unfolding; raw gaps avoid the jitter of the moving local mean.
    double rsum = 0.0;
    std::size_t rcount = 0;
    for (std::ptrdiff_t k = i0; k + 2 < i1; ++k) {
        const double g0 = energies[k + 1] - energies[k];
        const double g1 = energies[k + 2] - energies[k + 1];
        const double hi = std::max(g0, g1);
        if (hi > 0.0) {
            rsum += std::min(g0, g1) / hi;
            ++rcount;
        }
    }
    st.mean_r = rcount ? rsum / static_cast<double>(rcount) : 0.0;

    const double width = opt.s_max / opt.n_bins;
    st.bin_edges.resize(static_cast<std::size_t>(opt.n_bins) + 1);
    for (int b = 0; b <= opt.n_bins; ++b) st.bin_edges[static_cast<std::size_t>(b)] = b * width;
    std::vector<double> counts(static_cast<std::size_t>(opt.n_bins), 0.0);
    double in_range = 0.0;
    for (double s : st.spacings) {
        if (s < 0.0 || s >= opt.s_max) continue;
        const auto b = std::min<std::size_t>(static_cast<std::size_t>(s / width), counts.size() - 1);
        counts[b] += 1.0;
        in_range += 1.0;
    }
    st.densities.resize(counts.size());
    for (std::size_t b = 0; b < counts.size(); ++b) st.densities[b] = in_range > 0 ? counts[b] / (in_range * width) : 0.0;
    return st;
}

double wigner_dyson_pdf(double s) {
    return s < 0 ? 0.0 : 0.5 * std::numbers::pi * s * std::exp(-0.25 * std::numbers::pi * s * s);
}

double wigner_dyson_cdf(double s) { return s <= 0 ? 0.0 : 1.0 - std::exp(-0.25 * std::numbers::pi * s * s); }

double wigner_dyson_distance(const SpectralStats& st) {
    double dist = 0.0;
    for (std::size_t b = 0; b < st.densities.size(); ++b) {
        const double lo = st.bin_edges[b];
        const double hi = st.bin_edges[b + 1];
        dist += std::abs(st.densities[b] * (hi - lo) - (wigner_dyson_cdf(hi) - wigner_dyson_cdf(lo)));
    }
    return dist;
}

}  // namespace ethlab
