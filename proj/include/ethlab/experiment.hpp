#pragma once

#include "ethlab/config.hpp"
#include "ethlab/dynamics.hpp"
#include "ethlab/ef_structure.hpp"
#include "ethlab/eigen_cache.hpp"
#include "ethlab/eth.hpp"
#include "ethlab/predictions.hpp"
#include "ethlab/spectral.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ethlab {

struct EnvData {
    ChainConfig chain;
    SparseHamiltonian h;
    EigenDecomposition eig;
};

// Shared decompositions for one process. Environment decompositions are kept
// in memory and, when a cache root is set, on disk; the coupling never enters
// their key. Safe to call from several worker threads.
class Workspace {
public:
    explicit Workspace(std::optional<std::filesystem::path> cache_root = EigenCache::default_root());

    std::shared_ptr<const EnvData> env(const ChainConfig& chain, std::size_t env_dim_cap);
    EigenDecomposition total(const ChainConfig& chain, const CouplingConfig& coupling, const SparseHamiltonian& h_total,
                             std::size_t total_dim_cap);

private:
    std::optional<EigenCache> cache_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const EnvData>> envs_;
    std::map<std::string, std::shared_ptr<std::mutex>> building_;
};

// Throws ConfigError with a memory estimate when dim exceeds cap.
void require_within_cap(std::size_t dim, std::size_t cap, const std::string& what);

ChainConfig chain_with_n(const ChainConfig& base, int n_sites);

// ---- spectrum -------------------------------------------------------------

struct SpectrumResult {
    int n_sites = 0;
    SpectralStats stats;
    double wd_distance = 0.0;
    Eigen::VectorXd energies;
};

SpectrumResult run_spectrum(const ChainConfig& chain, const AnalysisConfig& analysis, Workspace& ws,
                            std::size_t env_dim_cap);

// ---- ETH checks -----------------------------------------------------------

struct ObservableEth {
    std::string name;                // "x" or "z"
    MatrixElements elements;         // pairs with both levels in the ETH shell
    HCurve curve;
    FluctuationStats stats;
    double diag_deviation_gauss = 0.0;
    std::vector<GBin> g_profile;     // pairs whose mean energy lies in the ETH shell
};

struct DeltaHEntry {
    double q_s = 0.0;
    ShellSpec shell;  // initial shell for this N
    double delta_e = 0.0;
    DeltaH result;
};

struct EthCheckResult {
    int n_sites = 0;
    std::vector<ObservableEth> observables;
    std::vector<DeltaHEntry> delta_h;  // S^x at the coupling site, lambda = 0
};

EthCheckResult run_eth_check(const ExperimentConfig& cfg, int n_sites, Workspace& ws,
                             const SparseHamiltonian* extra_observable = nullptr);

// ---- single dynamics point --------------------------------------------------

struct PointSpec {
    int n_sites = 10;
    double q_s = 0.05;
    InteractionKind kind = InteractionKind::SxSx;
    double lambda = 0.0;
    std::uint64_t seed = 1;

    std::string id() const;
};

struct PointOptions {
    std::function<void(const Sample&)> observer;  // receives time-average samples
    bool force_time_average = false;
    bool want_widths = true;
};

struct PointResult {
    PointSpec spec;
    ShellSpec shell;
    std::size_t shell_levels = 0;
    std::string measured_source;  // diagonal_ensemble | time_average
    Rdm rho;
    Eigen::MatrixXcd f;
    std::optional<Rdm> rho_time_average;
    std::optional<Rdm> rho_diagonal_ensemble;
    std::optional<ConvergenceReport> convergence;
    std::optional<double> max_norm_drift;
    std::optional<double> max_energy_drift;
    bool invariants_ok = true;
    double stationarity_residual = 0.0;
    PredictionReport prediction;
    std::optional<EfWidthReport> widths;
    EffectiveRegion region;
    DeltaH delta_h;
    std::optional<double> participation;
    std::optional<double> fluctuation_bound;
    double f_deviation = 0.0;  // ||F^T - h0 rho||_F
    std::vector<std::string> notes;
};

PointResult run_point(const ExperimentConfig& cfg, const PointSpec& spec, Workspace& ws, const PointOptions& options = {});

// ---- widths -----------------------------------------------------------------

struct WidthResult {
    PointSpec spec;
    EfWidthReport report;
    double participation = 0.0;
    EffectiveRegion region;
};

WidthResult run_widths(const ExperimentConfig& cfg, const PointSpec& spec, Workspace& ws);

// ---- serialization ----------------------------------------------------------

nlohmann::json complex_to_json(std::complex<double> z);
nlohmann::json matrix_to_json(const Eigen::MatrixXcd& m);
nlohmann::json to_json(const PredictionReport& p);
nlohmann::json to_json(const PointResult& r);
nlohmann::json to_json(const ScanResult& s);
nlohmann::json to_json(const SpectrumResult& r);
nlohmann::json to_json(const EthCheckResult& r);

// ---- commands ---------------------------------------------------------------

struct CommandOptions {
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    int workers = 1;
    std::optional<double> lambda;  // evolve only
};

void cmd_spectrum(const ExperimentConfig& cfg, const CommandOptions& opt, Workspace& ws);
void cmd_eth_check(const ExperimentConfig& cfg, const CommandOptions& opt, Workspace& ws);
PointResult cmd_evolve(const ExperimentConfig& cfg, const CommandOptions& opt, Workspace& ws);
nlohmann::json cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opt, Workspace& ws);
void cmd_ef_width(const ExperimentConfig& cfg, const CommandOptions& opt, Workspace& ws);

struct ReportResult {
    nlohmann::json summary;
    std::string table;                  // human-readable
    std::vector<std::string> warnings;
};

ReportResult cmd_report(const std::filesystem::path& run_dir);

// Table layout: one row per N, columns lambda_c / lambda_h per (q_s, kind).
std::string format_table(const nlohmann::json& rows);

}  // namespace ethlab
