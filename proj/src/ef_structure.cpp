#include "ethlab/ef_structure.hpp"

#include "ethlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ethlab {

UncoupledBasis::UncoupledBasis(const Eigen::VectorXd& qubit_levels, const EigenDecomposition& env_eig)
    : qubit_energies(qubit_levels), env(&env_eig) {
    const auto d = static_cast<Eigen::Index>(env_eig.dim());
    energies.resize(qubit_levels.size() * d);
    for (Eigen::Index a = 0; a < qubit_levels.size(); ++a)
        energies.segment(a * d, d) = env_eig.energies.array() + qubit_levels[a];
}

Eigen::VectorXd UncoupledBasis::components(const EigenDecomposition& total_eig, std::size_t n) const {
    const auto d = static_cast<Eigen::Index>(env->dim());
    if (total_eig.vectors.rows() != energies.size()) throw std::invalid_argument("total decomposition does not match basis");
    const auto col = total_eig.vectors.col(static_cast<Eigen::Index>(n));
    Eigen::VectorXd c(energies.size());
    for (Eigen::Index a = 0; a < qubit_energies.size(); ++a)
        c.segment(a * d, d).noalias() = env->vectors.transpose() * col.segment(a * d, d);
    return c;
}

double ef_width(const Eigen::VectorXd& weights, const Eigen::VectorXd& e, double center, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
    if (weights.size() != e.size()) throw std::invalid_argument("weights and energies differ in length");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(e.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(e[a] - center) < std::abs(e[b] - center); });
    const double target = (1.0 - epsilon) * weights.sum() - 1e-14;
    double acc = 0.0;
    for (auto k : order) {
        acc += weights[k];
        if (acc >= target) return 2.0 * std::abs(e[k] - center);
    }
    return order.empty() ? 0.0 : 2.0 * std::abs(e[order.back()] - center);
}

double ef_width(const EigenDecomposition& total_eig, std::size_t n, const UncoupledBasis& basis, double epsilon) {
    const Eigen::VectorXd c = basis.components(total_eig, n);
    return ef_width(c.cwiseAbs2(), basis.energies, total_eig.energies[static_cast<Eigen::Index>(n)], epsilon);
}

Eigen::VectorXd populations(const EigenDecomposition& total_eig, const WaveFunction& psi0) {
    if (psi0.amplitudes.size() != static_cast<Eigen::Index>(total_eig.dim()))
        throw std::invalid_argument("initial state does not match the decomposition");
    return (total_eig.vectors.transpose() * psi0.amplitudes).cwiseAbs2();
}

EfWidthReport w_max(const EigenDecomposition& total_eig, const UncoupledBasis& basis, const WaveFunction& psi0,
                    double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.5)) throw ConfigError("epsilon must lie in (0, 0.5)");
    const Eigen::VectorXd p = populations(total_eig, psi0);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(p.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return p[a] > p[b]; });

    EfWidthReport r;
    r.epsilon = epsilon;
    r.relevant_set_rule = "fewest eigenstates by descending population covering 1-epsilon of the initial state";
    const double target = (1.0 - epsilon) * p.sum() - 1e-14;
    double acc = 0.0;
    std::vector<Eigen::Index> relevant;
    for (auto n : order) {
        relevant.push_back(n);
        acc += p[n];
        if (acc >= target) break;
    }

    // Rotate the relevant eigenvectors into the uncoupled basis in blocks, so
    // the environment eigenvectors are streamed once per block rather than per state.
    const auto d = static_cast<Eigen::Index>(basis.env->dim());
    const Eigen::Index levels = basis.qubit_energies.size();
    constexpr Eigen::Index block = 256;
    for (std::size_t first = 0; first < relevant.size(); first += block) {
        const auto count = static_cast<Eigen::Index>(std::min<std::size_t>(block, relevant.size() - first));
        Eigen::MatrixXd v(total_eig.vectors.rows(), count);
        for (Eigen::Index k = 0; k < count; ++k) v.col(k) = total_eig.vectors.col(relevant[first + static_cast<std::size_t>(k)]);
        Eigen::MatrixXd c(v.rows(), count);
        for (Eigen::Index a = 0; a < levels; ++a)
            c.middleRows(a * d, d).noalias() = basis.env->vectors.transpose() * v.middleRows(a * d, d);
        for (Eigen::Index k = 0; k < count; ++k) {
            const auto n = relevant[first + static_cast<std::size_t>(k)];
            StateWidth s;
            s.n = static_cast<std::size_t>(n);
            s.energy = total_eig.energies[n];
            s.population = p[n];
            s.width = ef_width(c.col(k).cwiseAbs2(), basis.energies, s.energy, epsilon);
            r.w_eps_max = std::max(r.w_eps_max, s.width);
            r.per_state.push_back(s);
        }
    }
    return r;
}

EffectiveRegion effective_region(const ShellSpec& shell, double delta_s, double w_eps_max) {
    if (shell.delta_e0 < 0.0 || delta_s < 0.0 || w_eps_max < 0.0)
        throw ConfigError("effective region inputs must be nonnegative");
    return {shell.delta_e0 + 2.0 * delta_s + w_eps_max, shell.delta_e0, 2.0 * delta_s, w_eps_max};
}

double participation(const Eigen::VectorXd& p) {
    const double s = p.squaredNorm();
    if (!(s > 0.0)) throw ConfigError("participation of an empty population vector");
    return 1.0 / s;
}

double participation(const EigenDecomposition& total_eig, const WaveFunction& psi0) {
    return participation(populations(total_eig, psi0));
}

double fluctuation_bound(double g2, double l0) {
    if (!(g2 >= 0.0) || !(l0 > 0.0)) throw ConfigError("fluctuation bound needs g2 >= 0 and L0 > 0");
    return 2.0 * g2 / l0;
}

}  // namespace ethlab
