#pragma once

#include "ethlab/dynamics.hpp"
#include "ethlab/lattice.hpp"
#include "ethlab/shell.hpp"
#include "ethlab/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ethlab {

// How the shell centre follows the chain length in N sweeps.
enum class E0Rule {
    Fixed,    // e0 as given for every N
    PerSite,  // e0 * N / reference_n, keeping e0/N constant
};

struct ShellConfig {
    ShellSpec spec{-1.2, 0.1};
    E0Rule rule = E0Rule::PerSite;
    int reference_n = 13;

    ShellSpec for_n(int n_sites) const;
};

enum class MeasureMode {
    Auto,         // diagonal ensemble when the total system fits the cap, else time average
    TimeAverage,  // always propagate
    Both,         // both when possible; the diagonal ensemble is reported as measured
};

struct DynamicsConfig {
    double t_min = 0.0;
    double t_max = 5000.0;
    double dt_sample = 1.0;
    double step = 0.5;
    int krylov_dim = 30;
    double krylov_tol = 1e-10;
    double convergence_tol = 5e-3;
    std::uint64_t seed = 1;
    StateKind state_kind = StateKind::RandomPhase;
    MeasureMode mode = MeasureMode::Auto;
};

struct AnalysisConfig {
    double epsilon = 0.05;
    double eps_h = 0.1;
    double eps_c = 0.1;
    double window_width = 0.01;  // h(e) smoothing, in per-site energy
    int observable_site = 7;
    ShellSpec eth_shell{-1.2, 0.2};
    std::size_t eth_min_levels = 50;  // fewer levels in eth_shell is an error
    double omega_bin = 0.1;
    double omega_max = 4.0;
    SpectralOptions spectral;
};

struct SweepConfig {
    std::vector<double> lambda_grid{0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5};
    std::vector<int> n_grid{10};
    std::vector<double> q_s{0.05};
    std::vector<InteractionKind> kinds{InteractionKind::SxSx};
};

struct LimitsConfig {
    std::size_t total_dim_cap = 4096;
    std::size_t env_dim_cap = 8192;
};

struct ExperimentConfig {
    ChainConfig chain;
    CouplingConfig coupling;
    ShellConfig shell;
    Eigen::VectorXcd c0_raw = Eigen::Vector2cd(0.51, 0.86);
    SweepConfig sweep;
    DynamicsConfig dynamics;
    AnalysisConfig analysis;
    LimitsConfig limits;
    std::string output_dir = "out";

    Eigen::VectorXcd c0() const { return normalized(c0_raw); }
    void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ChainConfig& c);
nlohmann::json to_json(const CouplingConfig& c);
nlohmann::json to_json(const ShellSpec& s);

// SHA-256 over the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);
std::string env_cache_key(const ChainConfig& chain);
std::string total_cache_key(const ChainConfig& chain, const CouplingConfig& coupling);

std::string to_string(E0Rule r);
std::string to_string(MeasureMode m);
std::string to_string(StateKind k);

}  // namespace ethlab
