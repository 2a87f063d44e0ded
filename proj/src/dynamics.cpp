#include "ethlab/dynamics.hpp"

#include "ethlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace ethlab {

PortableRng::PortableRng(std::uint64_t seed) : engine_(seed) {}

double PortableRng::uniform() {
    // 53 high bits, exactly representable
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::complex<double> PortableRng::complex_normal() {
    // Box-Muller; 1-u keeps the logarithm finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));  // variance 1/2 per component
    return std::polar(r, 2.0 * std::numbers::pi * u2);
}

ShellState sample_shell_state(const EigenDecomposition& env_eig, const ShellSpec& shell, std::uint64_t seed,
                              StateKind kind) {
    shell.validate();
    ShellState st;
    st.support = shell.members(env_eig.energies);
    if (st.support.empty())
        throw ConfigError("energy shell [" + std::to_string(shell.lo()) + ", " + std::to_string(shell.hi()) +
                          "] contains no environment level");
    st.coefficients = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(env_eig.dim()));
    PortableRng rng(seed);
    for (auto i : st.support) {
        const auto k = static_cast<Eigen::Index>(i);
        if (kind == StateKind::RandomPhase)
            st.coefficients[k] = std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform());
        else
            st.coefficients[k] = rng.complex_normal();
    }
    st.coefficients /= st.coefficients.norm();
    st.vector = env_eig.vectors.cast<std::complex<double>>() * st.coefficients;
    return st;
}

Eigen::VectorXcd normalized(const Eigen::VectorXcd& c0) {
    const double n = c0.norm();
    if (!(n > 0.0)) throw ConfigError("qubit amplitudes must not all vanish");
    return c0 / n;
}

WaveFunction build_initial_state(const Eigen::VectorXcd& c0, const Eigen::VectorXcd& env) {
    if (std::abs(c0.norm() - 1.0) > 1e-10)
        throw ConfigError("qubit amplitudes have norm " + std::to_string(c0.norm()) + ", expected 1");
    if (std::abs(env.norm() - 1.0) > 1e-10)
        throw ConfigError("environment state has norm " + std::to_string(env.norm()) + ", expected 1");
    WaveFunction psi;
    psi.env_dim = static_cast<std::size_t>(env.size());
    psi.amplitudes.resize(c0.size() * env.size());
    for (Eigen::Index a = 0; a < c0.size(); ++a) psi.amplitudes.segment(a * env.size(), env.size()) = c0[a] * env;
    return psi;
}

WaveFunction propagate(const SparseHamiltonian& h, const WaveFunction& psi, double dt, int krylov_dim) {
    KrylovOptions opt;
    opt.krylov_dim = krylov_dim;
    KrylovPropagator prop(h, opt);
    WaveFunction out = psi;
    prop.step(out.amplitudes, dt);
    out.time += dt;
    return out;
}

Branches extract_branches(const WaveFunction& psi) {
    if (psi.env_dim == 0 || psi.amplitudes.size() % static_cast<Eigen::Index>(psi.env_dim) != 0)
        throw std::invalid_argument("wave function length is not a multiple of the environment dimension");
    Branches b;
    b.time = psi.time;
    const auto d = static_cast<Eigen::Index>(psi.env_dim);
    for (Eigen::Index a = 0; a < psi.amplitudes.size() / d; ++a) b.b.emplace_back(psi.amplitudes.segment(a * d, d));
    return b;
}

Eigen::VectorXcd reassemble(const Branches& b) {
    if (b.b.empty()) return {};
    const Eigen::Index d = b.b.front().size();
    Eigen::VectorXcd v(d * static_cast<Eigen::Index>(b.b.size()));
    for (std::size_t a = 0; a < b.b.size(); ++a) v.segment(static_cast<Eigen::Index>(a) * d, d) = b.b[a];
    return v;
}

Rdm rdm_from_branches(const Branches& b) {
    const auto m = static_cast<Eigen::Index>(b.b.size());
    Rdm rho(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index c = 0; c < m; ++c) rho(a, c) = b.b[static_cast<std::size_t>(c)].dot(b.b[static_cast<std::size_t>(a)]);
    return rho;
}

Eigen::MatrixXcd f_operator(const Branches& b, const SparseHamiltonian& h_ie) {
    const auto m = static_cast<Eigen::Index>(b.b.size());
    std::vector<Eigen::VectorXcd> hb;
    hb.reserve(b.b.size());
    for (const auto& v : b.b) hb.push_back(matvec(h_ie, v));
    Eigen::MatrixXcd f(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index c = 0; c < m; ++c) f(a, c) = b.b[static_cast<std::size_t>(a)].dot(hb[static_cast<std::size_t>(c)]);
    return f;
}

RdmCheck check_rdm(const Rdm& rho, double herm_tol, double trace_tol, double pos_tol) {
    RdmCheck c;
    c.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    c.trace_error = std::abs(rho.trace() - 1.0);
    const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
    c.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(herm, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    c.ok = c.hermiticity <= herm_tol && c.trace_error <= trace_tol && c.min_eigenvalue >= pos_tol;
    return c;
}

double energy(const SparseHamiltonian& h, const WaveFunction& psi) {
    return sandwich(psi.amplitudes, h, psi.amplitudes).real();
}

Eigen::MatrixXcd interaction_commutator(const Branches& b, const std::vector<InteractionPart>& parts) {
    const auto m = static_cast<Eigen::Index>(b.b.size());
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(m, m);
    for (const auto& p : parts) {
        const Eigen::MatrixXcd ft = f_operator(b, p.env).transpose();
        const Eigen::MatrixXcd q = p.qubit.cast<std::complex<double>>();
        acc += p.strength * (q * ft - ft * q);
    }
    return acc;
}

Eigen::MatrixXcd drho_dt_rhs(const Branches& b, const Eigen::Matrix2d& h_s, const std::vector<InteractionPart>& parts) {
    const Rdm rho = rdm_from_branches(b);
    const Eigen::MatrixXcd hs = h_s.cast<std::complex<double>>();
    const Eigen::MatrixXcd w = hs * rho - rho * hs + interaction_commutator(b, parts);
    return std::complex<double>(0.0, -1.0) * w;
}

double stationarity_residual(const Rdm& rho_bar, const Eigen::MatrixXcd& f_bar, const Eigen::MatrixXd& h_s,
                             const Eigen::MatrixXd& h_is, double lambda) {
    const Eigen::MatrixXcd hs = h_s.cast<std::complex<double>>();
    const Eigen::MatrixXcd hi = h_is.cast<std::complex<double>>();
    const Eigen::MatrixXcd ft = f_bar.transpose();
    return (hs * rho_bar - rho_bar * hs + lambda * (hi * ft - ft * hi)).norm();
}

TimeAverage time_average(const SparseHamiltonian& h, const WaveFunction& psi0, const SparseHamiltonian& h_ie,
                         const TimeAverageOptions& opt, const std::function<void(const Sample&)>& observer) {
    if (!(opt.t_max > opt.t_min && opt.t_min >= 0.0)) throw ConfigError("time window needs t_max > t_min >= 0");
    if (!(opt.dt_sample > 0.0) || !(opt.step > 0.0)) throw ConfigError("sampling interval and step must be positive");

    KrylovPropagator prop(h, opt.krylov);
    WaveFunction psi = psi0;
    const double e_ref = energy(h, psi0);
    const double n_ref = psi0.amplitudes.norm();

    auto advance_to = [&](double t) {
        while (t - psi.time > 1e-12) {
            const double dt = std::min(opt.step, t - psi.time);
            prop.step(psi.amplitudes, dt);
            psi.time += dt;
        }
        psi.time = t;
    };

    const auto n_samples = static_cast<std::size_t>(std::floor((opt.t_max - opt.t_min) / opt.dt_sample + 1e-9)) + 1;
    const double t_mid = 0.5 * (opt.t_min + opt.t_max);
    const auto m = static_cast<Eigen::Index>(psi0.levels());

    TimeAverage out;
    out.rho = Rdm::Zero(m, m);
    out.f = Eigen::MatrixXcd::Zero(m, m);
    Rdm first_half = Rdm::Zero(m, m);
    std::size_t n_first = 0;

    for (std::size_t k = 0; k < n_samples; ++k) {
        const double t = opt.t_min + static_cast<double>(k) * opt.dt_sample;
        advance_to(t);
        Sample s;
        s.time = t;
        const Branches b = extract_branches(psi);
        s.rho = rdm_from_branches(b);
        s.f = f_operator(b, h_ie);
        for (const auto& v : b.b) s.branch_norms.push_back(v.squaredNorm());
        s.energy = energy(h, psi);
        s.check = check_rdm(s.rho);

        out.rho += s.rho;
        out.f += s.f;
        if (t <= t_mid + 1e-12) {
            first_half += s.rho;
            ++n_first;
        }
        out.invariants_ok = out.invariants_ok && s.check.ok;
        out.max_norm_drift = std::max(out.max_norm_drift, std::abs(psi.amplitudes.norm() - n_ref));
        out.max_energy_drift =
            std::max(out.max_energy_drift, std::abs(s.energy - e_ref) / std::max(1.0, std::abs(e_ref)));
        if (observer) observer(s);
    }
    out.rho /= static_cast<double>(n_samples);
    out.f /= static_cast<double>(n_samples);
    first_half /= static_cast<double>(n_first);
    out.convergence.n_samples = n_samples;
    out.convergence.window_difference = (first_half - out.rho).cwiseAbs().maxCoeff();
    out.convergence.converged = out.convergence.window_difference <= opt.convergence_tol;
    out.propagation = prop.stats();
    return out;
}

DiagonalEnsemble diagonal_ensemble(const EigenDecomposition& eig, const WaveFunction& psi0, const SparseHamiltonian* h_ie) {
    const auto dim = static_cast<Eigen::Index>(eig.dim());
    if (psi0.amplitudes.size() != dim) throw std::invalid_argument("initial state does not match the decomposition");
    const auto d = static_cast<Eigen::Index>(psi0.env_dim);
    const Eigen::Index m = psi0.levels();

    DiagonalEnsemble out;
    out.min_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index n = 0; n + 1 < dim; ++n) {
        const double gap = eig.energies[n + 1] - eig.energies[n];
        if (gap < 1e-12) {
            std::ostringstream msg;
            msg << "degenerate total spectrum: levels " << n << " and " << n + 1 << " at E=" << eig.energies[n]
                << " differ by " << gap;
            throw NumericalError(msg.str());
        }
        out.min_gap = std::min(out.min_gap, gap);
    }

    const Eigen::VectorXcd overlaps = eig.vectors.transpose() * psi0.amplitudes;
    out.populations = overlaps.cwiseAbs2();

    // rho_ab = sum_n p_n sum_i V(a i, n) V(b i, n); the vectors are real.
    out.rho = Rdm::Zero(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index c = a; c < m; ++c) {
            const Eigen::VectorXd col =
                eig.vectors.middleRows(a * d, d).cwiseProduct(eig.vectors.middleRows(c * d, d)).colwise().sum().transpose();
            out.rho(a, c) = out.rho(c, a) = col.dot(out.populations);
        }
    }
    if (h_ie) {
        if (static_cast<Eigen::Index>(h_ie->dim) != d) throw std::invalid_argument("H^IE dimension mismatch");
        std::vector<Eigen::MatrixXd> hv;
        for (Eigen::Index c = 0; c < m; ++c) {
            Eigen::MatrixXd block(d, dim);
            const Eigen::MatrixXd src = eig.vectors.middleRows(c * d, d);
            for (Eigen::Index n = 0; n < dim; ++n) block.col(n) = matvec(*h_ie, Eigen::VectorXd(src.col(n)));
            hv.push_back(std::move(block));
        }
        out.f = Eigen::MatrixXcd::Zero(m, m);
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index c = 0; c < m; ++c) {
                const Eigen::VectorXd col =
                    eig.vectors.middleRows(a * d, d).cwiseProduct(hv[static_cast<std::size_t>(c)]).colwise().sum().transpose();
                out.f(a, c) = col.dot(out.populations);
            }
    }
    return out;
}

}  // namespace ethlab
