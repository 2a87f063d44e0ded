#include "ethlab/lattice.hpp"

#include "ethlab/errors.hpp"

#include <set>

namespace ethlab {

namespace {

constexpr int kMaxSites = 24;

inline double sz_of(std::size_t i, int site) { return ((i >> (site - 1)) & 1U) ? 0.5 : -0.5; }

}  // namespace

void ChainConfig::validate() const {
    if (n_sites < 2) throw ConfigError("chain needs at least 2 sites, got " + std::to_string(n_sites));
    if (n_sites > kMaxSites) throw ConfigError("chain length " + std::to_string(n_sites) + " exceeds supported maximum");
    std::set<int> seen;
    for (const auto& d : defects) {
        if (d.site < 1 || d.site > n_sites)
            throw ConfigError("defect site " + std::to_string(d.site) + " outside [1, " + std::to_string(n_sites) + "]");
        if (!seen.insert(d.site).second) throw ConfigError("duplicate defect site " + std::to_string(d.site));
    }
}

void CouplingConfig::validate(const ChainConfig& chain) const {
    if (q_s < 0.0) throw ConfigError("q_s must be nonnegative so that alpha=0 is the lower qubit level");
    auto check_site = [&](int s) {
        if (s < 1 || s > chain.n_sites)
            throw ConfigError("coupling site " + std::to_string(s) + " outside [1, " + std::to_string(chain.n_sites) + "]");
    };
    if (kind == InteractionKind::Generic) {
        if (terms.empty()) throw ConfigError("generic interaction needs at least one term");
        for (const auto& t : terms) check_site(t.site);
    } else {
        check_site(coupling_site);
    }
}

Eigen::Matrix2d qubit_operator(QubitOp op) {
    Eigen::Matrix2d sx, sz;
    sx << 0.0, 0.5, 0.5, 0.0;
    // alpha=0 is the lower level of q_s S^z, i.e. S^z = -1/2
    sz << -0.5, 0.0, 0.0, 0.5;
    switch (op) {
        case QubitOp::X: return sx;
        case QubitOp::Z: return sz;
        case QubitOp::XPlusZ: return sx + sz;
    }
    throw ConfigError("unknown qubit operator");
}

SparseHamiltonian build_env_hamiltonian(const ChainConfig& cfg) {
    cfg.validate();
    const std::size_t dim = cfg.dim();
    const int n = cfg.n_sites;
    std::vector<Triplet> t;
    t.reserve(dim * static_cast<std::size_t>(n + 1));
    for (std::size_t i = 0; i < dim; ++i) {
        double diag = 0.0;
        for (const auto& d : cfg.defects) diag += d.strength * sz_of(i, d.site);
        for (int l = 1; l <= n; ++l) {
            if (l == n && !cfg.periodic) break;
            // N=2 periodic would double-count the single bond; keep it once.
            if (l == n && n == 2) break;
            const int next = l == n ? 1 : l + 1;
            diag += cfg.j_z * sz_of(i, l) * sz_of(i, next);
        }
        const auto row = static_cast<std::uint32_t>(i);
        if (diag != 0.0) t.push_back({row, row, diag});
        if (cfg.b_x != 0.0)
            for (int l = 1; l <= n; ++l)
                t.push_back({row, static_cast<std::uint32_t>(i ^ (std::size_t{1} << (l - 1))), 0.5 * cfg.b_x});
    }
    return SparseHamiltonian::from_triplets(dim, std::move(t));
}

Eigen::Matrix2d build_qubit_hamiltonian(const CouplingConfig& cfg) {
    return cfg.q_s * qubit_operator(QubitOp::Z);
}

SparseHamiltonian local_observable(int site, Axis axis, int n_sites) {
    if (n_sites < 1 || n_sites > kMaxSites) throw ConfigError("invalid chain length " + std::to_string(n_sites));
    if (site < 1 || site > n_sites)
        throw ConfigError("site " + std::to_string(site) + " outside [1, " + std::to_string(n_sites) + "]");
    const std::size_t dim = std::size_t{1} << n_sites;
    std::vector<Triplet> t;
    t.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const auto row = static_cast<std::uint32_t>(i);
        if (axis == Axis::X)
            t.push_back({row, static_cast<std::uint32_t>(i ^ (std::size_t{1} << (site - 1))), 0.5});
        else
            t.push_back({row, row, sz_of(i, site)});
    }
    return SparseHamiltonian::from_triplets(dim, std::move(t));
}

std::vector<InteractionPart> build_interaction(const CouplingConfig& cfg, const ChainConfig& chain) {
    cfg.validate(chain);
    std::vector<InteractionPart> parts;
    switch (cfg.kind) {
        case InteractionKind::SxSx:
            parts.push_back({cfg.lambda, qubit_operator(QubitOp::X), local_observable(cfg.coupling_site, Axis::X, chain.n_sites)});
            break;
        case InteractionKind::SxPlusSzSx:
            parts.push_back(
                {cfg.lambda, qubit_operator(QubitOp::XPlusZ), local_observable(cfg.coupling_site, Axis::X, chain.n_sites)});
            break;
        case InteractionKind::Generic:
            for (const auto& term : cfg.terms)
                parts.push_back({cfg.lambda * term.lambda, qubit_operator(term.qubit_op),
                                 local_observable(term.site, term.axis, chain.n_sites)});
            break;
        default: throw ConfigError("unknown interaction kind");
    }
    return parts;
}

SparseHamiltonian build_total_hamiltonian(const ChainConfig& chain, const CouplingConfig& coupling,
                                          const SparseHamiltonian& h_env) {
    coupling.validate(chain);
    if (h_env.dim != chain.dim()) throw std::invalid_argument("environment Hamiltonian has wrong dimension");
    const Eigen::Matrix2d h_s = build_qubit_hamiltonian(coupling);
    const std::size_t d = h_env.dim;

    std::vector<Triplet> t;
    for (std::size_t a = 0; a < 2; ++a) {
        const double shift = h_s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
        for (auto x : h_env.to_triplets())
            t.push_back({static_cast<std::uint32_t>(a * d + x.row), static_cast<std::uint32_t>(a * d + x.col), x.value});
        if (shift != 0.0)
            for (std::size_t i = 0; i < d; ++i)
                t.push_back({static_cast<std::uint32_t>(a * d + i), static_cast<std::uint32_t>(a * d + i), shift});
    }
    if (coupling.lambda != 0.0) {
        for (const auto& part : build_interaction(coupling, chain)) {
            for (auto x : kron(part.qubit, part.env).to_triplets()) {
                x.value *= part.strength;
                t.push_back(x);
            }
        }
    }
    return SparseHamiltonian::from_triplets(2 * d, std::move(t));
}

SparseHamiltonian build_total_hamiltonian(const ChainConfig& chain, const CouplingConfig& coupling) {
    return build_total_hamiltonian(chain, coupling, build_env_hamiltonian(chain));
}

std::string to_string(InteractionKind kind) {
    switch (kind) {
        case InteractionKind::SxSx: return "SxSx";
        case InteractionKind::SxPlusSzSx: return "SxPlusSzSx";
        case InteractionKind::Generic: return "Generic";
    }
    return "?";
}

std::string to_string(Axis axis) { return axis == Axis::X ? "x" : "z"; }

std::string to_string(QubitOp op) {
    switch (op) {
        case QubitOp::X: return "x";
        case QubitOp::Z: return "z";
        case QubitOp::XPlusZ: return "x+z";
    }
    return "?";
}

InteractionKind interaction_kind_from_string(const std::string& s) {
    if (s == "SxSx" || s == "1") return InteractionKind::SxSx;
    if (s == "SxPlusSzSx" || s == "2") return InteractionKind::SxPlusSzSx;
    if (s == "Generic") return InteractionKind::Generic;
    throw ConfigError("unknown interaction kind '" + s + "'");
}

Axis axis_from_string(const std::string& s) {
    if (s == "x" || s == "X") return Axis::X;
    if (s == "z" || s == "Z") return Axis::Z;
    throw ConfigError("unknown axis '" + s + "'");
}

QubitOp qubit_op_from_string(const std::string& s) {
    if (s == "x" || s == "X") return QubitOp::X;
    if (s == "z" || s == "Z") return QubitOp::Z;
    if (s == "x+z" || s == "X+Z") return QubitOp::XPlusZ;
    throw ConfigError("unknown qubit operator '" + s + "'");
}

}  // namespace ethlab
