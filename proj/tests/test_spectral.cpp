#include "ethlab/eigensolver.hpp"
#include "ethlab/errors.hpp"
#include "ethlab/spectral.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace ethlab;

namespace {

Eigen::VectorXd cumulative(const std::vector<double>& gaps) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(gaps.size()) + 1);
    e[0] = 0.0;
    for (std::size_t k = 0; k < gaps.size(); ++k) e[static_cast<Eigen::Index>(k) + 1] = e[static_cast<Eigen::Index>(k)] + gaps[k];
    return e;
}

SpectralStats histogram_of(const std::vector<double>& s, int bins = 20, double s_max = 4.0) {
    SpectralStats st;
    const double w = s_max / bins;
    for (int b = 0; b <= bins; ++b) st.bin_edges.push_back(b * w);
    st.densities.assign(static_cast<std::size_t>(bins), 0.0);
    std::size_t inside = 0;
    for (double x : s) {
        if (x < 0.0 || x >= s_max) continue;
        st.densities[static_cast<std::size_t>(x / w)] += 1.0;
        ++inside;
    }
    for (auto& d : st.densities) d /= static_cast<double>(inside) * w;
    return st;
}

}  // namespace

TEST(Spectral, PoissonLevels) {
    std::mt19937_64 rng(42);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> gaps(8000);
    for (auto& g : gaps) g = ex(rng);
    const auto st = spacing_statistics(cumulative(gaps));
    EXPECT_NEAR(st.mean_r, 2.0 * std::log(2.0) - 1.0, 0.01);
    EXPECT_GE(wigner_dyson_distance(st), 0.3);
}

TEST(Spectral, PicketFence) {
    const auto st = spacing_statistics(cumulative(std::vector<double>(1000, 0.37)));
    EXPECT_NEAR(st.mean_r, 1.0, 1e-12);
    for (double s : st.spacings) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Spectral, GoeSurrogate) {
    std::mt19937_64 rng(7);
    double r = 0.0;
    // One matrix scatters by about 0.015; average enough of them to resolve the 0.01 band.
    const int samples = 16;
    for (int k = 0; k < samples; ++k) r += spacing_statistics(eigvalsh(oracle::random_symmetric(1000, rng))).mean_r;
    EXPECT_NEAR(r / samples, 0.5307, 0.01);
}

TEST(Spectral, DensitiesIntegrateToOne) {
    std::mt19937_64 rng(8);
    const auto st = spacing_statistics(eigvalsh(oracle::random_symmetric(600, rng)));
    double total = 0.0;
    for (std::size_t b = 0; b < st.densities.size(); ++b) total += st.densities[b] * (st.bin_edges[b + 1] - st.bin_edges[b]);
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GE(st.mean_r, 0.0);
    EXPECT_LE(st.mean_r, 1.0);
}

TEST(Spectral, TooFewLevels) {
    EXPECT_THROW(spacing_statistics(Eigen::VectorXd::LinSpaced(4, 0, 1)), ConfigError);
    EXPECT_THROW(spacing_statistics(Eigen::VectorXd::LinSpaced(150, 0, 1)), ConfigError);
}

TEST(WignerDyson, PdfNormalizedAndCdfConsistent) {
    double integral = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) integral += wigner_dyson_pdf((k + 0.5) * 10.0 / n) * 10.0 / n;
    EXPECT_NEAR(integral, 1.0, 1e-8);
    EXPECT_NEAR(wigner_dyson_cdf(1.3), 1.0 - std::exp(-M_PI * 1.69 / 4.0), 1e-15);
}

TEST(WignerDyson, InverseCdfSamplesAreClose) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(10000);
    for (auto& x : s) x = std::sqrt(-4.0 * std::log(1.0 - u(rng)) / M_PI);
    EXPECT_LE(wigner_dyson_distance(histogram_of(s)), 0.05);
}

TEST(WignerDyson, ExponentialSamplesAreFar) {
    std::mt19937_64 rng(100);
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> s(10000);
    for (auto& x : s) x = ex(rng);
    EXPECT_GE(wigner_dyson_distance(histogram_of(s)), 0.3);
}

TEST(WignerDyson, ExactBinsGiveOnlyTailError) {
    SpectralStats st = histogram_of({});
    const double inside = wigner_dyson_cdf(4.0);
    for (std::size_t b = 0; b < st.densities.size(); ++b) {
        const double lo = st.bin_edges[b], hi = st.bin_edges[b + 1];
        st.densities[b] = (wigner_dyson_cdf(hi) - wigner_dyson_cdf(lo)) / inside / (hi - lo);
    }
    EXPECT_LE(wigner_dyson_distance(st), 1e-5);
}
