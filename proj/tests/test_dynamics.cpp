#include "ethlab/dynamics.hpp"
#include "ethlab/eigensolver.hpp"
#include "ethlab/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ethlab;

namespace {

struct Fixture {
    ChainConfig chain;
    CouplingConfig coupling;
    SparseHamiltonian h_env, h_total;
    EigenDecomposition env_eig;
    std::vector<InteractionPart> parts;
    Eigen::Matrix2d h_s;

    Fixture(int n, double lambda, double q_s = 0.05, InteractionKind kind = InteractionKind::SxSx) {
        chain.n_sites = n;
        coupling.q_s = q_s;
        coupling.lambda = lambda;
        coupling.coupling_site = std::min(7, n);
        coupling.kind = kind;
        h_env = build_env_hamiltonian(chain);
        h_total = build_total_hamiltonian(chain, coupling);
        env_eig = eigh(h_env.to_dense());
        parts = build_interaction(coupling, chain);
        h_s = build_qubit_hamiltonian(coupling);
    }

    WaveFunction initial(std::uint64_t seed, ShellSpec shell) const {
        const auto st = sample_shell_state(env_eig, shell, seed);
        return build_initial_state(normalized(Eigen::Vector2cd(0.51, 0.86)), st.vector);
    }
};

}  // namespace

TEST(ShellState, SingleLevelShellIsThatEigenstate) {
    Fixture f(6, 0.0);
    const double e = f.env_eig.energies[20];
    const double gap = std::min(e - f.env_eig.energies[19], f.env_eig.energies[21] - e);
    const auto st = sample_shell_state(f.env_eig, {e, 0.5 * gap}, 3);
    ASSERT_EQ(st.support.size(), 1u);
    EXPECT_NEAR(std::abs(st.vector.dot(f.env_eig.vectors.col(20).cast<cplx>())), 1.0, 1e-12);
}

TEST(ShellState, SupportMatchesShellAndIsDeterministic) {
    Fixture f(8, 0.0);
    const ShellSpec shell{-1.2 * 8 / 13, 0.1};
    for (auto kind : {StateKind::RandomPhase, StateKind::ComplexGaussian}) {
        const auto a = sample_shell_state(f.env_eig, shell, 11, kind);
        const auto b = sample_shell_state(f.env_eig, shell, 11, kind);
        EXPECT_EQ(a.coefficients, b.coefficients);
        EXPECT_EQ(a.support.size(), shell.members(f.env_eig.energies).size());
        EXPECT_NEAR(a.vector.norm(), 1.0, 1e-12);
        for (Eigen::Index i = 0; i < a.coefficients.size(); ++i) {
            const bool in = shell.contains(f.env_eig.energies[i]);
            EXPECT_EQ(a.coefficients[i] != cplx(0.0), in);
        }
    }
    EXPECT_THROW(sample_shell_state(f.env_eig, {100.0, 0.1}, 1), ConfigError);
}

TEST(ShellState, TypicalOverlap) {
    Fixture f(8, 0.0);
    const ShellSpec shell{-0.5, 0.4};
    const auto l = static_cast<double>(shell.members(f.env_eig.energies).size());
    for (auto kind : {StateKind::RandomPhase, StateKind::ComplexGaussian}) {
        double mean = 0.0;
        const int pairs = 400;
        for (int k = 0; k < pairs; ++k) {
            const auto a = sample_shell_state(f.env_eig, shell, 2 * k + 1, kind).coefficients;
            const auto b = sample_shell_state(f.env_eig, shell, 2 * k + 2, kind).coefficients;
            mean += std::norm(a.dot(b));
        }
        mean /= pairs;
        EXPECT_NEAR(mean * l, 1.0, 0.2);
    }
}

TEST(InitialState, ProductStructure) {
    Fixture f(6, 0.0);
    const auto env = sample_shell_state(f.env_eig, {-0.5, 0.4}, 1).vector;
    const auto up = build_initial_state(Eigen::Vector2cd(1, 0), env);
    EXPECT_EQ(extract_branches(up).b[1].norm(), 0.0);
    const Eigen::Vector2cd c0 = normalized(Eigen::Vector2cd(0.51, 0.86));
    const auto psi = build_initial_state(c0, env);
    const Rdm rho = rdm_from_branches(extract_branches(psi));
    EXPECT_NEAR(rho(0, 0).real(), 0.2601, 5e-4);
    EXPECT_LE((rho - c0 * c0.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_THROW(build_initial_state(Eigen::Vector2cd(1, 1), env), ConfigError);
    EXPECT_THROW(normalized(Eigen::Vector2cd(0, 0)), ConfigError);
}

TEST(Propagate, EigenvectorOnlyRotatesPhase) {
    Fixture f(5, 0.2);
    const auto eig = eigh(f.h_total.to_dense());
    WaveFunction psi{eig.vectors.col(7).cast<cplx>(), f.h_env.dim, 0.0};
    const auto out = propagate(f.h_total, psi, 3.0);
    const Eigen::VectorXcd expect = std::exp(cplx(0, -eig.energies[7] * 3.0)) * psi.amplitudes;
    EXPECT_LE((out.amplitudes - expect).norm(), 1e-10);
    EXPECT_DOUBLE_EQ(out.time, 3.0);
}

TEST(Propagate, MatchesDensePropagatorAndSemigroup) {
    Fixture f(6, 0.1);
    const auto psi = f.initial(4, {-0.5, 0.5});
    const auto one = propagate(f.h_total, psi, 1.0);
    const Eigen::VectorXcd dense = oracle::propagator(f.h_total.to_dense(), 1.0) * psi.amplitudes;
    EXPECT_LE((one.amplitudes - dense).cwiseAbs().maxCoeff(), 1e-9);
    const auto two = propagate(f.h_total, propagate(f.h_total, psi, 0.5), 0.5);
    EXPECT_LE((two.amplitudes - one.amplitudes).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(one.amplitudes.norm(), 1.0, 1e-10);
    EXPECT_THROW(propagate(f.h_total, psi, 1.0, 1), ConfigError);
}

TEST(Branches, ReassemblyAndNorms) {
    Fixture f(6, 0.0);
    const auto psi = f.initial(2, {-0.5, 0.5});
    const auto b = extract_branches(psi);
    ASSERT_EQ(b.b.size(), 2u);
    EXPECT_EQ(reassemble(b), psi.amplitudes);
    const double n1 = 0.51 * 0.51 / (0.51 * 0.51 + 0.86 * 0.86);
    EXPECT_NEAR(b.b[0].squaredNorm(), n1, 1e-14);
    // Block-diagonal evolution keeps branch norms fixed.
    const auto later = extract_branches(propagate(f.h_total, psi, 25.0));
    EXPECT_NEAR(later.b[0].squaredNorm(), n1, 1e-10);
    EXPECT_NEAR(later.b[1].squaredNorm(), 1.0 - n1, 1e-10);
}

TEST(Rdm, OrthogonalBranchesAndPartialTraceOracle) {
    Branches b;
    b.b = {Eigen::Vector4cd(1, 0, 0, 0) / std::sqrt(2.0), Eigen::Vector4cd(0, 0, 1, 0) / std::sqrt(2.0)};
    EXPECT_LE((rdm_from_branches(b) - 0.5 * Eigen::Matrix2cd::Identity()).norm(), 1e-15);

    Fixture f(6, 0.3);
    const auto psi = propagate(f.h_total, f.initial(9, {-0.5, 0.5}), 13.0);
    const Rdm rho = rdm_from_branches(extract_branches(psi));
    EXPECT_LE((rho - oracle::partial_trace(psi.amplitudes, 2)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(check_rdm(rho).ok);
}

TEST(Rdm, CheckFlagsViolations) {
    Rdm bad(2, 2);
    bad << 0.5, 0.1, 0.2, 0.5;
    EXPECT_FALSE(check_rdm(bad).ok);
    Rdm neg(2, 2);
    neg << 1.2, 0, 0, -0.2;
    EXPECT_FALSE(check_rdm(neg).ok);
    Rdm tr(2, 2);
    tr << 0.6, 0, 0, 0.5;
    EXPECT_FALSE(check_rdm(tr).ok);
}

TEST(FOperator, IdentityZeroBranchAndOracle) {
    Fixture f(6, 0.3);
    const auto psi = propagate(f.h_total, f.initial(9, {-0.5, 0.5}), 7.0);
    const auto b = extract_branches(psi);
    const Rdm rho = rdm_from_branches(b);
    EXPECT_LE((f_operator(b, SparseHamiltonian::identity(64)) - rho.transpose()).cwiseAbs().maxCoeff(), 1e-15);

    const Eigen::MatrixXd hie = f.parts[0].env.to_dense();
    const auto fo = f_operator(b, f.parts[0].env);
    for (int a = 0; a < 2; ++a)
        for (int c = 0; c < 2; ++c)
            EXPECT_LE(std::abs(fo(a, c) - b.b[a].dot(hie.cast<cplx>() * b.b[c])), 1e-12);
    EXPECT_LE((fo - fo.adjoint()).cwiseAbs().maxCoeff(), 1e-14);

    Branches z = b;
    z.b[1].setZero();
    const auto fz = f_operator(z, f.parts[0].env);
    EXPECT_EQ(fz.row(1).norm() + fz.col(1).norm(), 0.0);
}

TEST(EquationOfMotion, FiniteDifference) {
    for (auto kind : {InteractionKind::SxSx, InteractionKind::SxPlusSzSx}) {
        Fixture f(6, 0.2, 0.05, kind);
        const auto psi = propagate(f.h_total, f.initial(5, {-0.5, 0.5}), 4.0);
        const double h = 1e-4;
        const Rdm plus = rdm_from_branches(extract_branches(propagate(f.h_total, psi, h)));
        // Backward step: conjugation reverses time for a real Hamiltonian.
        WaveFunction back = psi;
        back.amplitudes = back.amplitudes.conjugate();
        back = propagate(f.h_total, back, h);
        back.amplitudes = back.amplitudes.conjugate();
        const Rdm minus = rdm_from_branches(extract_branches(back));
        const Eigen::MatrixXcd fd = (plus - minus) / (2 * h);
        const Eigen::MatrixXcd rhs = drho_dt_rhs(extract_branches(psi), f.h_s, f.parts);
        EXPECT_LE((fd - rhs).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(TimeAverage, UncoupledLimit) {
    Fixture f(6, 0.0, 0.3);
    const auto psi = f.initial(1, {-0.5, 0.5});
    TimeAverageOptions opt;
    opt.t_max = 1000;
    std::size_t samples = 0;
    const auto avg = time_average(f.h_total, psi, f.parts[0].env, opt, [&](const Sample& s) {
        ++samples;
        EXPECT_TRUE(s.check.ok);
    });
    EXPECT_EQ(samples, 1001u);
    EXPECT_LE(std::abs(avg.rho(0, 1)), 5e-3);
    const double n1 = 0.51 * 0.51 / (0.51 * 0.51 + 0.86 * 0.86);
    EXPECT_NEAR(avg.rho(0, 0).real(), n1, 1e-10);
    EXPECT_NEAR(avg.rho(1, 1).real(), 1 - n1, 1e-10);
    EXPECT_LE(avg.max_norm_drift, 1e-10);
    EXPECT_LE(avg.max_energy_drift, 1e-9);
    EXPECT_TRUE(avg.invariants_ok);
    EXPECT_EQ(avg.convergence.n_samples, 1001u);
}

TEST(TimeAverage, ResidualShrinksWithWindow) {
    Fixture f(6, 0.2);
    const auto psi = f.initial(3, {-0.5, 0.5});
    std::vector<double> res;
    for (double t : {1000.0, 2000.0, 4000.0}) {
        TimeAverageOptions opt;
        opt.t_max = t;
        const auto avg = time_average(f.h_total, psi, f.parts[0].env, opt);
        res.push_back(stationarity_residual(avg.rho, avg.f, f.h_s, f.parts[0].qubit, f.parts[0].strength));
    }
    EXPECT_LT(res[1], 0.75 * res[0]);
    EXPECT_LT(res[2], 0.75 * res[1]);
    EXPECT_LT(res[2], 0.4 * res[0]);
}

TEST(DiagonalEnsemble, SingleEigenstateAndUncoupled) {
    Fixture f(5, 0.2);
    const auto eig = eigh(f.h_total.to_dense());
    WaveFunction n{eig.vectors.col(11).cast<cplx>(), f.h_env.dim, 0.0};
    const auto de = diagonal_ensemble(eig, n);
    EXPECT_LE((de.rho - oracle::partial_trace(n.amplitudes, 2)).cwiseAbs().maxCoeff(), 1e-13);

    Fixture g(6, 0.0);
    const auto geig = eigh(g.h_total.to_dense());
    const auto psi = g.initial(2, {-0.5, 0.5});
    const Rdm r = diagonal_ensemble_rdm(geig, psi);
    const double n1 = 0.51 * 0.51 / (0.51 * 0.51 + 0.86 * 0.86);
    EXPECT_NEAR(r(0, 0).real(), n1, 1e-12);
    EXPECT_LE(std::abs(r(0, 1)), 1e-12);
}

TEST(DiagonalEnsemble, StationarityIdentityAndTimeAverage) {
    Fixture f(6, 0.1);
    const auto eig = eigh(f.h_total.to_dense());
    const auto psi = f.initial(6, {-0.5, 0.5});
    const auto de = diagonal_ensemble(eig, psi, &f.parts[0].env);
    EXPECT_LE(stationarity_residual(de.rho, de.f, f.h_s, f.parts[0].qubit, f.parts[0].strength), 1e-10);
    EXPECT_TRUE(check_rdm(de.rho).ok);
    TimeAverageOptions opt;
    opt.t_max = 5000;
    const auto avg = time_average(f.h_total, psi, f.parts[0].env, opt);
    EXPECT_LE((avg.rho - de.rho).cwiseAbs().maxCoeff(), 0.01);
}

TEST(DiagonalEnsemble, RejectsDegenerateSpectrum) {
    EigenDecomposition e;
    e.energies = Eigen::Vector4d(-1, 0.5, 0.5, 2);
    e.vectors = Eigen::Matrix4d::Identity();
    WaveFunction psi{Eigen::Vector4cd(0.5, 0.5, 0.5, 0.5), 2, 0.0};
    try {
        diagonal_ensemble(e, psi);
        FAIL() << "degenerate spectrum accepted";
    } catch (const NumericalError& err) {
        EXPECT_NE(std::string(err.what()).find("1"), std::string::npos);
        EXPECT_NE(std::string(err.what()).find("2"), std::string::npos);
    }
}
