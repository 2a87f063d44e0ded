#include "ethlab/eigensolver.hpp"
#include "ethlab/errors.hpp"
#include "ethlab/eth.hpp"
#include "ethlab/lattice.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>

using namespace ethlab;

namespace {

const EigenDecomposition& env_eig(int n) {
    static std::map<int, EigenDecomposition> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        ChainConfig c;
        c.n_sites = n;
        it = cache.emplace(n, eigh(build_env_hamiltonian(c).to_dense())).first;
    }
    return it->second;
}

MatrixElements synthetic(std::size_t levels, double lo, double hi) {
    MatrixElements m;
    m.energies = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(levels), lo, hi);
    m.diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(levels));
    m.shell = {0.5 * (lo + hi), hi - lo + 1e-9};
    return m;
}

}  // namespace

TEST(ObservableInEigenbasis, Identity) {
    const auto& e = env_eig(6);
    const ShellSpec shell{-0.8, 0.6};
    const auto m = observable_in_eigenbasis(e, SparseHamiltonian::identity(64), shell);
    EXPECT_LE((m.diag.array() - 1.0).abs().maxCoeff(), 1e-13);
    ASSERT_FALSE(m.offdiag.empty());
    for (const auto& s : m.offdiag) EXPECT_LE(std::abs(s.value), 1e-13);
    for (const auto& g : g_profile(m, shell, 0.1)) EXPECT_LE(g.mean_g2, 1e-26);
}

TEST(ObservableInEigenbasis, HamiltonianIsDiagonal) {
    ChainConfig c;
    c.n_sites = 7;
    const auto h = build_env_hamiltonian(c);
    const auto& e = env_eig(7);
    const auto m = observable_in_eigenbasis(e, h, {-1.0, 1.0});
    EXPECT_LE((m.diag - e.energies).cwiseAbs().maxCoeff(), 1e-12);
    for (const auto& s : m.offdiag) EXPECT_LE(std::abs(s.value), 1e-12);
}

TEST(ObservableInEigenbasis, DenseConjugationOracle) {
    const auto& e = env_eig(8);
    const auto op = local_observable(7, Axis::Z, 8);
    const ShellSpec shell{-0.9, 0.4};
    const auto m = observable_in_eigenbasis(e, op, shell);
    const Eigen::MatrixXd full = e.vectors.transpose() * op.to_dense() * e.vectors;
    EXPECT_LE((m.diag - full.diagonal()).cwiseAbs().maxCoeff(), 1e-10);
    std::size_t expected_pairs = 0;
    for (Eigen::Index i = 0; i < e.energies.size(); ++i)
        for (Eigen::Index j = i + 1; j < e.energies.size(); ++j)
            if (shell.contains(e.energies[i]) && shell.contains(e.energies[j])) ++expected_pairs;
    EXPECT_EQ(m.offdiag.size(), expected_pairs);
    for (const auto& s : m.offdiag) {
        EXPECT_TRUE(shell.contains(s.e_i) && shell.contains(s.e_j));
        EXPECT_NEAR(s.value, full(static_cast<Eigen::Index>(s.i), static_cast<Eigen::Index>(s.j)), 1e-10);
    }
    EXPECT_THROW(observable_in_eigenbasis(e, local_observable(1, Axis::Z, 7), shell), std::invalid_argument);
}

TEST(ObservableInEigenbasis, MeanInShellRule) {
    const auto& e = env_eig(8);
    const ShellSpec shell{-1.0, 0.2};
    const auto m = observable_in_eigenbasis(e, local_observable(7, Axis::X, 8), shell, PairRule::MeanInShell, 2.0);
    ASSERT_FALSE(m.offdiag.empty());
    for (const auto& s : m.offdiag) {
        EXPECT_TRUE(shell.contains(0.5 * (s.e_i + s.e_j)));
        EXPECT_LE(s.e_j - s.e_i, 2.0);
    }
}

TEST(SmoothedH, ConstantAndLine) {
    const auto& e = env_eig(8);
    MatrixElements m;
    m.energies = e.energies;
    m.diag = Eigen::VectorXd::Constant(e.energies.size(), 0.37);
    const auto flat = smoothed_h(m, 8, 0.01);
    for (double h : flat.h) EXPECT_NEAR(h, 0.37, 1e-14);
    EXPECT_NEAR(flat(-1.234), 0.37, 1e-14);

    const double a = 0.3, b = 0.1, w = 0.05;
    m.diag = (a * e.energies.array() + b).matrix();
    const auto line = smoothed_h(m, 8, w);
    for (std::size_t k = 0; k < line.e.size(); ++k) EXPECT_LE(std::abs(line.h[k] - (a * line.e[k] + b)), a * w * 8 / 2 + 1e-12);
    EXPECT_THROW(smoothed_h(m, 8, 0.0), ConfigError);
}

TEST(DeltaHRatio, ConstantCurveAndVanishingH0) {
    HCurve c{{-2, -1, 0, 1}, {0.5, 0.5, 0.5, 0.5}};
    const auto r = delta_h_ratio(c, -0.5, 0.5);
    EXPECT_EQ(r.delta_h, 0.0);
    EXPECT_EQ(r.ratio, 0.0);
    EXPECT_TRUE(r.applicable);
    HCurve z{{-2, -1, 0, 1}, {-1.0, 0.0, 1.0, 2.0}};
    const auto q = delta_h_ratio(z, -1.0, 0.5);
    EXPECT_FALSE(q.applicable);
    EXPECT_THROW(delta_h_ratio(c, 5.0, 0.5), ConfigError);
}

TEST(DeltaHRatio, LinearCurve) {
    HCurve c{{-2, -1, 0, 1}, {1.0, 2.0, 3.0, 4.0}};
    const auto r = delta_h_ratio(c, -0.5, 0.4);
    EXPECT_NEAR(r.h0, 2.5, 1e-14);
    EXPECT_NEAR(r.delta_h, 0.2, 1e-12);
    EXPECT_NEAR(r.ratio, 0.08, 1e-12);
}

TEST(FluctuationStats, EqualElements) {
    auto m = synthetic(200, -1.0, 1.0);
    m.diag.setConstant(0.2);
    for (std::size_t i = 0; i < 10; ++i) m.offdiag.push_back({i, i + 1, m.energies[Eigen::Index(i)], m.energies[Eigen::Index(i + 1)], 0.0});
    const auto st = fluctuation_stats(m, m.shell);
    EXPECT_EQ(st.sigma_d, 0.0);
    EXPECT_EQ(st.sigma_nd, 0.0);
    EXPECT_NEAR(st.mu, 0.2, 1e-15);
    EXPECT_EQ(st.gauss_stat_d, 0.0);
}

TEST(FluctuationStats, RecoversNormalWidths) {
    std::mt19937_64 rng(17);
    const double sd = 0.03, snd = 0.011, mu = -0.12;
    std::normal_distribution<double> gd(mu, sd), gnd(0.0, snd);
    auto m = synthetic(10000, -1.0, 1.0);
    for (Eigen::Index i = 0; i < m.diag.size(); ++i) m.diag[i] = gd(rng);
    double sq = 0.0;
    for (std::size_t k = 0; k < 10000; ++k) {
        const double v = gnd(rng);
        sq += v * v;
        m.offdiag.push_back({k, k + 1, m.energies[Eigen::Index(k % 9999)], m.energies[Eigen::Index(k % 9999 + 1)], v});
    }
    const auto st = fluctuation_stats(m, m.shell);
    EXPECT_NEAR(st.sigma_d, sd, 0.03 * sd);
    EXPECT_NEAR(st.sigma_nd, snd, 0.03 * snd);
    EXPECT_NEAR(st.mu, mu, 3 * sd / 100);
    EXPECT_NEAR(st.sigma_nd, std::sqrt(sq / 10000), 1e-12 * snd);
    EXPECT_LE(st.gauss_stat_d, 0.08);
    EXPECT_LE(st.gauss_stat_nd, 0.08);
    EXPECT_EQ(st.n_diag, 10000u);
}

TEST(FluctuationStats, RequiresEnoughLevels) {
    auto m = synthetic(30, -1.0, 1.0);
    EXPECT_THROW(fluctuation_stats(m, m.shell), ConfigError);
}

TEST(GaussianL1, DistinguishesShapes) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> flat(20000);
    for (auto& x : flat) x = u(rng);
    EXPECT_GE(gaussian_l1_distance(flat), 0.2);
}

TEST(EthChain, SigmaDecreasesWithSize) {
    const ShellSpec shell{-1.2 * 8 / 13.0, 0.3};
    const auto m8 = observable_in_eigenbasis(env_eig(8), local_observable(7, Axis::X, 8), shell);
    const ShellSpec shell10{-1.2 * 10 / 13.0, 0.3};
    const auto m10 = observable_in_eigenbasis(env_eig(10), local_observable(7, Axis::X, 10), shell10);
    const auto s8 = fluctuation_stats(m8, shell, 10);
    const auto s10 = fluctuation_stats(m10, shell10, 10);
    EXPECT_LT(s10.sigma_d, s8.sigma_d);
    EXPECT_LT(s10.sigma_nd, s8.sigma_nd);
}

TEST(EthChain, OffDiagonalProfileDecaysAtLargeOmega) {
    const ShellSpec shell{-1.2, 0.2};
    const auto m = observable_in_eigenbasis(env_eig(10), local_observable(7, Axis::X, 10), shell, PairRule::MeanInShell, 4.0);
    const auto prof = g_profile(m, shell, 0.1);
    double low = 0.0, high = 0.0;
    int nl = 0, nh = 0;
    for (const auto& b : prof) {
        if (b.omega >= 1.0 && b.omega < 2.0) low += b.mean_g2, ++nl;
        if (b.omega >= 2.0 && b.omega < 3.0) high += b.mean_g2, ++nh;
    }
    ASSERT_GT(nl, 0);
    ASSERT_GT(nh, 0);
    EXPECT_LT(high / nh, low / nl);
    EXPECT_GT(g2_max(prof), 0.0);
}
