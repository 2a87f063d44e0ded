#include "ethlab/experiment.hpp"

#include "ethlab/csv.hpp"
#include "ethlab/errors.hpp"
#include "ethlab/manifest.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

namespace ethlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Total decompositions above this size are recomputed rather than cached;
// a single entry would take over half a gigabyte.
constexpr std::size_t kTotalCacheMaxDim = 4096;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string compact(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

// Runs fn(k) for k in [0, n) on up to `workers` threads. The first exception
// is rethrown after all threads finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const auto w = static_cast<std::size_t>(std::max(1, workers));
    if (w == 1 || n <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex err_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(w, n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t k; (k = next++) < n;) {
                try {
                    fn(k);
                } catch (...) {
                    std::lock_guard lock(err_mutex);
                    if (!first) first = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

void write_json(const fs::path& p, const json& j) { write_text_atomic(p, j.dump(2) + "\n"); }

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot read " + p.string());
    json j;
    in >> j;
    return j;
}

double rel_error(std::complex<double> measured, std::complex<double> predicted) {
    if (std::abs(measured) < 1e-14) return std::abs(predicted) < 1e-14 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(measured - predicted) / std::abs(measured);
}

}  // namespace

// ---- workspace ----------------------------------------------------------------

Workspace::Workspace(std::optional<fs::path> cache_root) {
    if (cache_root) cache_.emplace(*cache_root);
}

void require_within_cap(std::size_t dim, std::size_t cap, const std::string& what) {
    if (dim <= cap) return;
    const double gib = 3.0 * static_cast<double>(dim) * static_cast<double>(dim) * 8.0 / (1 << 30);
    std::ostringstream s;
    s << what << " dimension " << dim << " exceeds the configured cap " << cap << "; a full decomposition needs about "
      << std::setprecision(3) << gib << " GiB. Raise limits." << (what == "environment" ? "env_dim_cap" : "total_dim_cap")
      << " if the machine has the memory, or reduce n_sites.";
    throw ConfigError(s.str());
}

ChainConfig chain_with_n(const ChainConfig& base, int n_sites) {
    ChainConfig c = base;
    c.n_sites = n_sites;
    c.validate();
    return c;
}

std::shared_ptr<const EnvData> Workspace::env(const ChainConfig& chain, std::size_t env_dim_cap) {
    chain.validate();
    require_within_cap(chain.dim(), env_dim_cap, "environment");
    const std::string key = env_cache_key(chain);
    std::shared_ptr<std::mutex> build;
    {
        std::lock_guard lock(mutex_);
        if (auto it = envs_.find(key); it != envs_.end()) return it->second;
        auto& m = building_[key];
        if (!m) m = std::make_shared<std::mutex>();
        build = m;
    }
    std::lock_guard build_lock(*build);
    {
        std::lock_guard lock(mutex_);
        if (auto it = envs_.find(key); it != envs_.end()) return it->second;
    }
    auto data = std::make_shared<EnvData>();
    data->chain = chain;
    data->h = build_env_hamiltonian(chain);
    std::optional<EigenDecomposition> eig;
    if (cache_) eig = cache_->load(key);
    if (eig && eig->dim() == chain.dim() && eig->vectors.size() > 0) {
        data->eig = std::move(*eig);
    } else {
        data->eig = eigh(data->h.to_dense());
        if (cache_) cache_->store(key, data->eig, {{"which", "env"}, {"chain", to_json(chain)}});
    }
    std::lock_guard lock(mutex_);
    envs_[key] = data;
    return data;
}

EigenDecomposition Workspace::total(const ChainConfig& chain, const CouplingConfig& coupling, const SparseHamiltonian& h,
                                    std::size_t cap) {
    require_within_cap(h.dim, cap, "total-system");
    const std::string key = total_cache_key(chain, coupling);
    const bool cacheable = cache_ && h.dim <= kTotalCacheMaxDim;
    if (cacheable)
        if (auto eig = cache_->load(key); eig && eig->dim() == h.dim && eig->vectors.size() > 0) return std::move(*eig);
    EigenDecomposition eig = eigh(h.to_dense());
    if (cacheable) cache_->store(key, eig, {{"which", "total"}, {"chain", to_json(chain)}, {"coupling", to_json(coupling)}});
    return eig;
}

// ---- spectrum -----------------------------------------------------------------

SpectrumResult run_spectrum(const ChainConfig& chain, const AnalysisConfig& analysis, Workspace& ws, std::size_t cap) {
    const auto env = ws.env(chain, cap);
    SpectrumResult r;
    r.n_sites = chain.n_sites;
    r.energies = env->eig.energies;
    r.stats = spacing_statistics(r.energies, analysis.spectral);
    r.wd_distance = wigner_dyson_distance(r.stats);
    return r;
}

// ---- ETH ----------------------------------------------------------------------

// Levels feeding a smoothed curve evaluated on [e0 - width/2, e0 + width/2]: one
// smoothing window of margin keeps the averages at the edges full.
static ShellSpec curve_support(const ShellSpec& shell, double width, const AnalysisConfig& a, int n_sites) {
    return {shell.e0, width + a.window_width * n_sites};
}

EthCheckResult run_eth_check(const ExperimentConfig& cfg, int n_sites, Workspace& ws, const SparseHamiltonian* extra) {
    const ChainConfig chain = chain_with_n(cfg.chain, n_sites);
    const auto env = ws.env(chain, cfg.limits.env_dim_cap);
    const auto& a = cfg.analysis;
    EthCheckResult r;
    r.n_sites = n_sites;

    std::vector<std::pair<std::string, SparseHamiltonian>> ops;
    ops.emplace_back("x", local_observable(a.observable_site, Axis::X, n_sites));
    ops.emplace_back("z", local_observable(a.observable_site, Axis::Z, n_sites));
    if (extra) ops.emplace_back("custom", *extra);

    for (const auto& [name, op] : ops) {
        ObservableEth o;
        o.name = name;
        o.elements = observable_in_eigenbasis(env->eig, op, a.eth_shell, PairRule::BothInShell);
        o.curve = smoothed_h(o.elements, n_sites, a.window_width);
        o.stats = fluctuation_stats(o.elements, a.eth_shell, a.eth_min_levels);
        o.diag_deviation_gauss = diagonal_deviation_gaussianity(o.elements, o.curve);
        const auto wide = observable_in_eigenbasis(env->eig, op, a.eth_shell, PairRule::MeanInShell, a.omega_max);
        o.g_profile = g_profile(wide, a.eth_shell, a.omega_bin);
        r.observables.push_back(std::move(o));
    }

    // Condition ratio at lambda = 0 for the coupled operator, where delta_e = delta_e0 + 2 q_s.
    CouplingConfig coupling = cfg.coupling;
    coupling.lambda = 1.0;
    const auto parts = build_interaction(coupling, chain);
    const ShellSpec shell = cfg.shell.for_n(n_sites);
    double widest = 0.0;
    for (double q : cfg.sweep.q_s) widest = std::max(widest, effective_region(shell, q, 0.0).delta_e);
    const auto elements =
        observable_in_eigenbasis(env->eig, parts.front().env, curve_support(shell, widest, a, n_sites), PairRule::BothInShell);
    const auto curve = smoothed_h(elements, n_sites, a.window_width);
    for (double q : cfg.sweep.q_s) {
        DeltaHEntry e;
        e.q_s = q;
        e.shell = shell;
        e.delta_e = effective_region(shell, q, 0.0).delta_e;
        e.result = delta_h_ratio(curve, shell.e0, e.delta_e, &elements);
        r.delta_h.push_back(e);
    }
    return r;
}

// ---- dynamics point ---------------------------------------------------------------

std::string PointSpec::id() const {
    std::ostringstream s;
    s << "N" << n_sites << "_q" << q_s << "_" << to_string(kind) << "_lam" << lambda << "_seed" << seed;
    return s.str();
}

PointResult run_point(const ExperimentConfig& cfg, const PointSpec& spec, Workspace& ws, const PointOptions& opt) {
    PointResult r;
    r.spec = spec;
    const ChainConfig chain = chain_with_n(cfg.chain, spec.n_sites);
    CouplingConfig coupling = cfg.coupling;
    coupling.q_s = spec.q_s;
    coupling.kind = spec.kind;
    coupling.lambda = spec.lambda;
    coupling.validate(chain);

    const auto env = ws.env(chain, cfg.limits.env_dim_cap);
    r.shell = cfg.shell.for_n(spec.n_sites);
    r.shell.require_inside(env->eig.energies);
    const ShellState state = sample_shell_state(env->eig, r.shell, spec.seed, cfg.dynamics.state_kind);
    r.shell_levels = state.support.size();
    const Eigen::VectorXcd c0 = cfg.c0();
    const WaveFunction psi0 = build_initial_state(c0, state.vector);

    const Eigen::Matrix2d h_s = build_qubit_hamiltonian(coupling);
    const Eigen::Vector2d levels = h_s.diagonal();
    // Term structure does not depend on lambda; unit strength keeps zero-coupling runs meaningful.
    CouplingConfig unit = coupling;
    unit.lambda = 1.0;
    auto parts = build_interaction(unit, chain);
    for (auto& p : parts) p.strength *= spec.lambda;

    std::vector<MatrixElements> elements;
    std::vector<HCurve> curves;
    std::vector<double> h0s, h1s;
    for (const auto& p : parts) {
        elements.push_back(observable_in_eigenbasis(env->eig, p.env, curve_support(r.shell, r.shell.delta_e0, cfg.analysis, spec.n_sites),
                                                    PairRule::BothInShell));
        curves.push_back(smoothed_h(elements.back(), spec.n_sites, cfg.analysis.window_width));
        h0s.push_back(curves.back()(r.shell.e0));
        h1s.push_back(h1_weighted(env->eig, p.env, state.coefficients).h1);
    }

    const SparseHamiltonian h_total = build_total_hamiltonian(chain, coupling, env->h);
    const bool within_cap = h_total.dim <= cfg.limits.total_dim_cap;
    const bool run_time_average = !within_cap || cfg.dynamics.mode != MeasureMode::Auto || opt.force_time_average;

    std::optional<Eigen::VectorXd> pops;
    Eigen::MatrixXcd comm_sum;
    if (within_cap) {
        const EigenDecomposition teig = ws.total(chain, coupling, h_total, cfg.limits.total_dim_cap);
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(2, 2);
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const auto de = diagonal_ensemble(teig, psi0, &parts[k].env);
            if (k == 0) {
                r.rho_diagonal_ensemble = de.rho;
                r.f = de.f;
                pops = de.populations;
            }
            const Eigen::MatrixXcd ft = de.f.transpose();
            const Eigen::MatrixXcd q = parts[k].qubit.cast<std::complex<double>>();
            acc += parts[k].strength * (q * ft - ft * q);
        }
        const Eigen::MatrixXcd hs = h_s.cast<std::complex<double>>();
        const Rdm& rho = *r.rho_diagonal_ensemble;
        r.stationarity_residual = (hs * rho - rho * hs + acc).norm();
        r.rho = rho;
        r.measured_source = "diagonal_ensemble";
        if (opt.want_widths) {
            const UncoupledBasis basis(levels, env->eig);
            r.widths = w_max(teig, basis, psi0, cfg.analysis.epsilon);
            r.participation = participation(*pops);
        }
    } else {
        r.notes.push_back("total dimension " + std::to_string(h_total.dim) + " above cap " +
                          std::to_string(cfg.limits.total_dim_cap) + ": time average only, eigenfunction widths skipped");
    }

    if (run_time_average) {
        TimeAverageOptions ta;
        ta.t_min = cfg.dynamics.t_min;
        ta.t_max = cfg.dynamics.t_max;
        ta.dt_sample = cfg.dynamics.dt_sample;
        ta.step = cfg.dynamics.step;
        ta.krylov.krylov_dim = cfg.dynamics.krylov_dim;
        ta.krylov.tol = cfg.dynamics.krylov_tol;
        ta.convergence_tol = cfg.dynamics.convergence_tol;
        const auto avg = time_average(h_total, psi0, parts.front().env, ta, opt.observer);
        r.rho_time_average = avg.rho;
        r.convergence = avg.convergence;
        r.max_norm_drift = avg.max_norm_drift;
        r.max_energy_drift = avg.max_energy_drift;
        r.invariants_ok = avg.invariants_ok;
        if (!avg.convergence.converged)
            r.notes.push_back("time average not converged: window difference " + compact(avg.convergence.window_difference));
        if (!within_cap) {
            r.rho = avg.rho;
            r.f = avg.f;
            r.measured_source = "time_average";
            if (parts.size() == 1)
                r.stationarity_residual = stationarity_residual(avg.rho, avg.f, h_s, parts[0].qubit, parts[0].strength);
            else
                r.notes.push_back("stationarity residual needs per-term averages; reported for the diagonal ensemble only");
        }
    }

    const double delta_s = levels.maxCoeff() - levels.minCoeff();
    const double w = r.widths ? r.widths->w_eps_max : 0.0;
    if (!r.widths) r.notes.push_back("effective region excludes the eigenfunction width");
    r.region = effective_region(r.shell, delta_s, w);
    try {
        const auto wide = observable_in_eigenbasis(
            env->eig, parts.front().env, curve_support(r.shell, r.region.delta_e, cfg.analysis, spec.n_sites),
            PairRule::BothInShell);
        r.delta_h = delta_h_ratio(smoothed_h(wide, spec.n_sites, cfg.analysis.window_width), r.shell.e0,
                                  r.region.delta_e, &wide);
    } catch (const ConfigError& e) {
        r.notes.push_back(std::string("condition ratio unavailable: ") + e.what());
        r.delta_h.applicable = false;
        r.delta_h.ratio = std::numeric_limits<double>::infinity();
    }

    // Fluctuation scale of H^IE inside the effective region.
    const ShellSpec gamma{r.shell.e0, r.region.delta_e};
    const auto in_gamma = observable_in_eigenbasis(env->eig, parts.front().env, gamma, PairRule::BothInShell);
    const double g2 = g2_max(g_profile(in_gamma, gamma, cfg.analysis.omega_bin));
    if (r.participation) r.fluctuation_bound = fluctuation_bound(g2, *r.participation);
    r.f_deviation = (r.f.transpose() - h0s.front() * r.rho).norm();

    // Predictions.
    PredictionReport& p = r.prediction;
    p.lambda = spec.lambda;
    p.measured_source = r.measured_source;
    p.rho12_measured = r.rho(0, 1);
    p.rho11 = r.rho(0, 0).real();
    p.rho22 = r.rho(1, 1).real();
    p.h0 = h0s.front();
    p.h1 = h1s.front();
    p.ratio_delta_h = r.delta_h.ratio;

    std::vector<RenormTerm> terms;
    for (std::size_t k = 0; k < parts.size(); ++k) terms.push_back({parts[k].strength, h0s[k], parts[k].qubit});
    const auto renorm = renormalized_hamiltonian(h_s, terms);
    if (parts.size() == 1 && delta_s > 0.0) {
        const Eta eta = eta_coefficients(parts[0].qubit, h_s);
        p.eta_d = eta.d;
        p.eta_r = eta.r;
        const auto tls = tls_prediction(eta, spec.lambda, p.h0, p.rho11, p.rho22);
        p.rho12_tls = tls.rho12;
        p.tls_pole = tls.pole;
    } else if (delta_s > 0.0) {
        // Same relation read off [H~, rho] = 0 for several terms.
        const auto& ht = renorm.h_tilde;
        const double den = ht(1, 1) - ht(0, 0);
        p.tls_pole = std::abs(den) < 1e-8 * delta_s;
        p.rho12_tls = ht(0, 1) * (p.rho22 - p.rho11) / den;
    } else {
        r.notes.push_back("degenerate qubit levels: two-level prediction undefined");
    }
    if (delta_s > 0.0) {
        Eigen::MatrixXcd weak = Eigen::MatrixXcd::Zero(2, 2);
        for (std::size_t k = 0; k < parts.size(); ++k)
            weak += weak_coupling_prediction(parts[k].strength, parts[k].qubit, levels, h1s[k], c0);
        p.rho12_weak = weak(0, 1);
    }
    p.rel_error_tls = rel_error(p.rho12_measured, p.rho12_tls);
    p.rel_error_weak = rel_error(p.rho12_measured, p.rho12_weak);
    p.commutator_residual = commutator_residual(renorm.h_tilde, r.rho).normalized;
    p.commutator_residual_bare = commutator_residual(h_s, r.rho).normalized;
    p.realness_residual = realness_residual(r.rho, parts.size() == 1 ? Eigen::MatrixXd(parts[0].qubit)
                                                                     : Eigen::MatrixXd(renorm.h_tilde - h_s));
    return r;
}

WidthResult run_widths(const ExperimentConfig& cfg, const PointSpec& spec, Workspace& ws) {
    const ChainConfig chain = chain_with_n(cfg.chain, spec.n_sites);
    CouplingConfig coupling = cfg.coupling;
    coupling.q_s = spec.q_s;
    coupling.kind = spec.kind;
    coupling.lambda = spec.lambda;
    const auto env = ws.env(chain, cfg.limits.env_dim_cap);
    const ShellSpec shell = cfg.shell.for_n(spec.n_sites);
    shell.require_inside(env->eig.energies);
    const auto state = sample_shell_state(env->eig, shell, spec.seed, cfg.dynamics.state_kind);
    const auto psi0 = build_initial_state(cfg.c0(), state.vector);
    const auto h_total = build_total_hamiltonian(chain, coupling, env->h);
    const auto teig = ws.total(chain, coupling, h_total, cfg.limits.total_dim_cap);
    const Eigen::Vector2d levels = build_qubit_hamiltonian(coupling).diagonal();

    WidthResult r;
    r.spec = spec;
    r.report = w_max(teig, UncoupledBasis(levels, env->eig), psi0, cfg.analysis.epsilon);
    r.participation = participation(teig, psi0);
    r.region = effective_region(shell, levels.maxCoeff() - levels.minCoeff(), r.report.w_eps_max);
    return r;
}

// ---- serialization -------------------------------------------------------------

json complex_to_json(std::complex<double> z) { return json::array({finite_or_null(z.real()), finite_or_null(z.imag())}); }

json matrix_to_json(const Eigen::MatrixXcd& m) {
    json rows = json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        json row = json::array();
        for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(complex_to_json(m(a, b)));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const PredictionReport& p) {
    return {{"lambda", p.lambda},
            {"measured_source", p.measured_source},
            {"rho12_measured", complex_to_json(p.rho12_measured)},
            {"rho12_measured_abs", std::abs(p.rho12_measured)},
            {"rho12_tls", complex_to_json(p.rho12_tls)},
            {"rho12_tls_abs", finite_or_null(std::abs(p.rho12_tls))},
            {"rho12_weak", complex_to_json(p.rho12_weak)},
            {"rho12_weak_abs", finite_or_null(std::abs(p.rho12_weak))},
            {"rho11", p.rho11},
            {"rho22", p.rho22},
            {"rel_error_tls", finite_or_null(p.rel_error_tls)},
            {"rel_error_weak", finite_or_null(p.rel_error_weak)},
            {"tls_pole", p.tls_pole},
            {"commutator_residual", p.commutator_residual},
            {"commutator_residual_bare", p.commutator_residual_bare},
            {"realness_residual", p.realness_residual},
            {"ratio_delta_h", finite_or_null(p.ratio_delta_h)},
            {"h0", p.h0},
            {"h1", p.h1},
            {"eta_d", p.eta_d},
            {"eta_r", p.eta_r}};
}

json to_json(const ScanResult& s) {
    json j = {{"value", s.value ? json(*s.value) : json(nullptr)}, {"reason", s.reason}};
    j["lambda_lo"] = s.lambda_lo ? json(*s.lambda_lo) : json(nullptr);
    j["lambda_hi"] = s.lambda_hi ? json(*s.lambda_hi) : json(nullptr);
    return j;
}

json to_json(const PointResult& r) {
    json j = {{"n_sites", r.spec.n_sites},
              {"q_s", r.spec.q_s},
              {"interaction_kind", to_string(r.spec.kind)},
              {"lambda", r.spec.lambda},
              {"seed", r.spec.seed},
              {"shell", to_json(r.shell)},
              {"shell_levels", r.shell_levels},
              {"measured_source", r.measured_source},
              {"rho", matrix_to_json(r.rho)},
              {"f", matrix_to_json(r.f)},
              {"stationarity_residual", r.stationarity_residual},
              {"invariants_ok", r.invariants_ok},
              {"prediction", to_json(r.prediction)},
              {"effective_region",
               {{"delta_e", r.region.delta_e},
                {"delta_e0", r.region.delta_e0},
                {"two_delta_s", r.region.two_delta_s},
                {"w_eps_max", r.region.w_eps_max}}},
              {"delta_h",
               {{"h0", r.delta_h.h0},
                {"delta_h", r.delta_h.delta_h},
                {"ratio", finite_or_null(r.delta_h.ratio)},
                {"delta_h_raw", r.delta_h.delta_h_raw},
                {"ratio_raw", finite_or_null(r.delta_h.ratio_raw)},
                {"applicable", r.delta_h.applicable},
                {"levels", r.delta_h.n_levels}}},
              {"f_deviation", r.f_deviation},
              {"notes", r.notes}};
    if (r.rho_time_average) j["rho_time_average"] = matrix_to_json(*r.rho_time_average);
    if (r.rho_diagonal_ensemble) j["rho_diagonal_ensemble"] = matrix_to_json(*r.rho_diagonal_ensemble);
    if (r.convergence)
        j["convergence"] = {{"window_difference", r.convergence->window_difference},
                            {"converged", r.convergence->converged},
                            {"samples", r.convergence->n_samples}};
    if (r.max_norm_drift) j["max_norm_drift"] = *r.max_norm_drift;
    if (r.max_energy_drift) j["max_energy_drift"] = *r.max_energy_drift;
    if (r.widths)
        j["widths"] = {{"w_eps_max", r.widths->w_eps_max},
                       {"epsilon", r.widths->epsilon},
                       {"relevant_states", r.widths->per_state.size()},
                       {"relevant_set_rule", r.widths->relevant_set_rule}};
    if (r.participation) j["participation"] = *r.participation;
    if (r.fluctuation_bound) j["fluctuation_bound"] = *r.fluctuation_bound;
    return j;
}

json to_json(const SpectrumResult& r) {
    return {{"n_sites", r.n_sites},
            {"levels", r.energies.size()},
            {"window", {r.stats.fraction_lo, r.stats.fraction_hi}},
            {"levels_in_window", r.stats.n_levels},
            {"mean_r", r.stats.mean_r},
            {"wigner_dyson_distance", r.wd_distance},
            {"bin_edges", r.stats.bin_edges},
            {"densities", r.stats.densities}};
}

json to_json(const EthCheckResult& r) {
    json obs = json::array();
    for (const auto& o : r.observables)
        obs.push_back({{"observable", o.name},
                       {"mu", o.stats.mu},
                       {"sigma_d", o.stats.sigma_d},
                       {"sigma_nd", o.stats.sigma_nd},
                       {"gauss_stat_d", o.stats.gauss_stat_d},
                       {"gauss_stat_nd", o.stats.gauss_stat_nd},
                       {"diag_deviation_gauss", o.diag_deviation_gauss},
                       {"levels_in_shell", o.stats.n_diag},
                       {"offdiag_pairs", o.stats.n_offdiag}});
    json dh = json::array();
    for (const auto& e : r.delta_h)
        dh.push_back({{"q_s", e.q_s},
                      {"e0", e.shell.e0},
                      {"delta_e", e.delta_e},
                      {"h0", e.result.h0},
                      {"delta_h", e.result.delta_h},
                      {"ratio", finite_or_null(e.result.ratio)},
                      {"ratio_raw", finite_or_null(e.result.ratio_raw)},
                      {"applicable", e.result.applicable}});
    return {{"n_sites", r.n_sites}, {"observables", obs}, {"delta_h", dh}};
}

// ---- commands ----------------------------------------------------------------------

namespace {

RunManifest open_manifest(const fs::path& out, const std::string& command, const std::string& hash) {
    fs::create_directories(out);
    if (fs::exists(RunManifest::path_in(out))) {
        RunManifest m = RunManifest::load(out);
        if (m.command == command && m.config_hash == hash && m.code_version == code_version()) return m;
        if (m.command == command && m.config_hash != hash)
            throw ConfigError(out.string() + " holds a " + command + " run with config " + m.config_hash +
                              "; use a fresh --out directory");
    }
    RunManifest m;
    m.command = command;
    m.config_hash = hash;
    m.code_version = code_version();
    return m;
}

ExperimentConfig with_seed(ExperimentConfig cfg, const CommandOptions& opt) {
    if (opt.seed) cfg.dynamics.seed = *opt.seed;
    return cfg;
}

void write_config_copy(const ExperimentConfig& cfg, const fs::path& out, RunManifest& m) {
    const auto p = out / "config.json";
    write_json(p, to_json(cfg));
    m.tasks["config"] = TaskRecord{"done", 0.0, {}, ""};
    m.add_artifact("config", out, p);
}

std::vector<PointSpec> grid_points(const ExperimentConfig& cfg) {
    std::vector<PointSpec> pts;
    for (int n : cfg.sweep.n_grid)
        for (double q : cfg.sweep.q_s)
            for (auto kind : cfg.sweep.kinds)
                for (double lam : cfg.sweep.lambda_grid) pts.push_back({n, q, kind, lam, cfg.dynamics.seed});
    return pts;
}

}  // namespace

void cmd_spectrum(const ExperimentConfig& base, const CommandOptions& opt, Workspace& ws) {
    const ExperimentConfig cfg = with_seed(base, opt);
    RunManifest m = open_manifest(opt.out, "spectrum", config_hash(cfg));
    write_config_copy(cfg, opt.out, m);
    CsvWriter summary(opt.out / "spectrum.csv", "spectrum-summary", {"n_sites", "levels_in_window", "mean_r", "wigner_dyson_l1"});
    for (int n : cfg.sweep.n_grid) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::string task = "spectrum_N" + std::to_string(n);
        const auto r = run_spectrum(chain_with_n(cfg.chain, n), cfg.analysis, ws, cfg.limits.env_dim_cap);
        const auto js = opt.out / (task + ".json");
        write_json(js, to_json(r));
        const auto levels = opt.out / ("levels_N" + std::to_string(n) + ".csv");
        {
            CsvWriter w(levels, "levels", {"index", "energy"});
            for (Eigen::Index k = 0; k < r.energies.size(); ++k) w.cell(static_cast<long long>(k)).cell(r.energies[k]).end_row();
        }
        const auto hist = opt.out / ("spacing_hist_N" + std::to_string(n) + ".csv");
        {
            CsvWriter w(hist, "spacing-histogram", {"s_lo", "s_hi", "density", "wigner_dyson_density"});
            for (std::size_t b = 0; b < r.stats.densities.size(); ++b) {
                const double lo = r.stats.bin_edges[b], hi = r.stats.bin_edges[b + 1];
                w.row({lo, hi, r.stats.densities[b], (wigner_dyson_cdf(hi) - wigner_dyson_cdf(lo)) / (hi - lo)});
            }
        }
        summary.cell(static_cast<long long>(n)).cell(static_cast<long long>(r.stats.n_levels)).cell(r.stats.mean_r).cell(r.wd_distance).end_row();
        auto& rec = m.tasks[task];
        rec = TaskRecord{"done", seconds_since(t0), {}, ""};
        for (const auto& f : {js, levels, hist}) m.add_artifact(task, opt.out, f);
        m.save(opt.out);
    }
    m.tasks["summary"] = TaskRecord{"done", 0.0, {}, ""};
    m.add_artifact("summary", opt.out, opt.out / "spectrum.csv");
    m.save(opt.out);
}

void cmd_eth_check(const ExperimentConfig& base, const CommandOptions& opt, Workspace& ws) {
    const ExperimentConfig cfg = with_seed(base, opt);
    RunManifest m = open_manifest(opt.out, "eth-check", config_hash(cfg));
    write_config_copy(cfg, opt.out, m);
    const auto fl_path = opt.out / "fluctuations.csv";
    const auto dh_path = opt.out / "delta_h.csv";
    CsvWriter fl(fl_path, "eth-fluctuations",
                 {"n_sites", "observable", "mu", "sigma_d", "sigma_nd", "gauss_stat_d", "gauss_stat_nd", "diag_deviation_gauss"});
    CsvWriter dh(dh_path, "condition-ratio",
                 {"n_sites", "q_s", "e0", "delta_e", "h0", "delta_h", "ratio", "delta_h_raw", "ratio_raw", "applicable"});
    for (int n : cfg.sweep.n_grid) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::string task = "eth_N" + std::to_string(n);
        const auto r = run_eth_check(cfg, n, ws);
        std::vector<fs::path> files{opt.out / (task + ".json")};
        write_json(files.front(), to_json(r));
        for (const auto& o : r.observables) {
            const auto hc = opt.out / ("h_curve_" + o.name + "_N" + std::to_string(n) + ".csv");
            {
                CsvWriter w(hc, "h-curve", {"energy", "energy_per_site", "h", "diag"});
                for (std::size_t k = 0; k < o.curve.e.size(); ++k)
                    w.row({o.curve.e[k], o.curve.e[k] / n, o.curve.h[k], o.elements.diag[static_cast<Eigen::Index>(k)]});
            }
            const auto gp = opt.out / ("g_profile_" + o.name + "_N" + std::to_string(n) + ".csv");
            {
                CsvWriter w(gp, "g-profile", {"omega", "mean_abs2", "pairs"});
                for (const auto& b : o.g_profile) w.cell(b.omega).cell(b.mean_g2).cell(static_cast<long long>(b.count)).end_row();
            }
            files.push_back(hc);
            files.push_back(gp);
            fl.cell(static_cast<long long>(n)).cell(o.name).cell(o.stats.mu).cell(o.stats.sigma_d).cell(o.stats.sigma_nd)
                .cell(o.stats.gauss_stat_d).cell(o.stats.gauss_stat_nd).cell(o.diag_deviation_gauss).end_row();
        }
        for (const auto& e : r.delta_h)
            dh.cell(static_cast<long long>(n)).cell(e.q_s).cell(e.shell.e0).cell(e.delta_e).cell(e.result.h0)
                .cell(e.result.delta_h).cell(e.result.ratio).cell(e.result.delta_h_raw).cell(e.result.ratio_raw)
                .cell(static_cast<long long>(e.result.applicable)).end_row();
        m.tasks[task] = TaskRecord{"done", seconds_since(t0), {}, ""};
        for (const auto& f : files) m.add_artifact(task, opt.out, f);
        m.save(opt.out);
    }
    m.tasks["summary"] = TaskRecord{"done", 0.0, {}, ""};
    m.save(opt.out);
}

PointResult cmd_evolve(const ExperimentConfig& base, const CommandOptions& opt, Workspace& ws) {
    const ExperimentConfig cfg = with_seed(base, opt);
    RunManifest m = open_manifest(opt.out, "evolve", config_hash(cfg) + (opt.lambda ? "/lambda=" + format_double(*opt.lambda) : ""));
    write_config_copy(cfg, opt.out, m);
    const auto t0 = std::chrono::steady_clock::now();
    PointSpec spec{cfg.chain.n_sites, cfg.coupling.q_s, cfg.coupling.kind, opt.lambda.value_or(cfg.coupling.lambda),
                   cfg.dynamics.seed};

    const auto traj_path = opt.out / "trajectory.csv";
    std::optional<CsvWriter> traj;
    PointOptions po;
    po.force_time_average = true;
    po.observer = [&](const Sample& s) {
        const auto m_levels = s.rho.rows();
        if (!traj) {
            std::vector<std::string> cols{"time"};
            for (Eigen::Index a = 0; a < m_levels; ++a)
                for (Eigen::Index b = 0; b < m_levels; ++b) {
                    cols.push_back("re_rho" + std::to_string(a + 1) + std::to_string(b + 1));
                    cols.push_back("im_rho" + std::to_string(a + 1) + std::to_string(b + 1));
                }
            for (Eigen::Index a = 0; a < m_levels; ++a) cols.push_back("branch_norm" + std::to_string(a + 1));
            cols.push_back("energy");
            traj.emplace(traj_path, "trajectory", cols);
        }
        traj->cell(s.time);
        for (Eigen::Index a = 0; a < m_levels; ++a)
            for (Eigen::Index b = 0; b < m_levels; ++b) traj->cell(s.rho(a, b).real()).cell(s.rho(a, b).imag());
        for (double nrm : s.branch_norms) traj->cell(nrm);
        traj->cell(s.energy).end_row();
    };
    PointResult r = run_point(cfg, spec, ws, po);
    traj.reset();

    json avg = to_json(r);
    avg["config"] = to_json(cfg);
    const auto avg_path = opt.out / "average.json";
    write_json(avg_path, avg);
    std::vector<fs::path> files{traj_path, avg_path};
    if (r.widths) {
        const auto wp = opt.out / "ef_widths.csv";
        CsvWriter w(wp, "ef-widths", {"n", "energy", "population", "width"});
        for (const auto& s : r.widths->per_state)
            w.cell(static_cast<long long>(s.n)).cell(s.energy).cell(s.population).cell(s.width).end_row();
        files.push_back(wp);
    }
    m.tasks["evolve"] = TaskRecord{"done", seconds_since(t0), {}, ""};
    for (const auto& f : files) m.add_artifact("evolve", opt.out, f);
    m.save(opt.out);
    return r;
}

json cmd_sweep(const ExperimentConfig& base, const CommandOptions& opt, Workspace& ws) {
    const ExperimentConfig cfg = with_seed(base, opt);
    RunManifest m = open_manifest(opt.out, "sweep", config_hash(cfg));
    write_config_copy(cfg, opt.out, m);
    m.save(opt.out);

    const auto points = grid_points(cfg);
    std::vector<std::size_t> pending;
    for (std::size_t k = 0; k < points.size(); ++k)
        if (!m.task_complete("point/" + points[k].id(), opt.out)) pending.push_back(k);

    std::mutex manifest_mutex;
    std::vector<std::string> failures;
    parallel_for(pending.size(), opt.workers, [&](std::size_t idx) {
        const PointSpec& spec = points[pending[idx]];
        const std::string task = "point/" + spec.id();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const PointResult r = run_point(cfg, spec, ws);
            const auto path = opt.out / "points" / (spec.id() + ".json");
            write_json(path, to_json(r));
            std::lock_guard lock(manifest_mutex);
            m.tasks[task] = TaskRecord{"done", seconds_since(t0), {}, r.widths ? "" : "eigenfunction widths skipped"};
            m.add_artifact(task, opt.out, path);
            m.save(opt.out);
        } catch (const NumericalError& e) {
            std::lock_guard lock(manifest_mutex);
            m.tasks[task] = TaskRecord{"failed", seconds_since(t0), {}, e.what()};
            failures.push_back(task + ": " + e.what());
            m.save(opt.out);
        }
    });

    // Tables are always rebuilt from the stored point files, so a resumed run
    // and an uninterrupted one produce identical summaries.
    json rows = json::array();
    std::vector<fs::path> files;
    for (int n : cfg.sweep.n_grid) {
        json row = {{"n_sites", n}, {"entries", json::array()}};
        for (double q : cfg.sweep.q_s) {
            for (auto kind : cfg.sweep.kinds) {
                std::vector<PredictionReport> reports;
                std::vector<std::pair<double, double>> ratios;
                bool ratios_complete = true;
                std::ostringstream name;
                name << "predictions_N" << n << "_q" << q << "_" << to_string(kind) << ".csv";
                const auto csv_path = opt.out / name.str();
                CsvWriter w(csv_path, "predictions",
                            {"lambda", "rho12_measured_abs", "rho12_tls_abs", "rho12_weak_abs", "rho12_measured_re",
                             "rho12_measured_im", "rho12_tls_re", "rho12_weak_re", "rho11", "rho22", "rel_error_tls",
                             "rel_error_weak", "h0", "h1", "ratio_delta_h", "w_eps_max", "delta_e", "measured_source"});
                for (double lam : cfg.sweep.lambda_grid) {
                    const PointSpec spec{n, q, kind, lam, cfg.dynamics.seed};
                    const auto path = opt.out / "points" / (spec.id() + ".json");
                    if (!fs::exists(path)) continue;
                    const json pj = read_json(path);
                    const json& pr = pj["prediction"];
                    auto num = [](const json& v) { return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>(); };
                    PredictionReport rep;
                    rep.lambda = lam;
                    rep.rel_error_tls = num(pr["rel_error_tls"]);
                    reports.push_back(rep);
                    const bool has_w = pj.contains("widths");
                    ratios_complete = ratios_complete && has_w;
                    if (lam > 0.0) ratios.emplace_back(lam, num(pj["delta_h"]["ratio"]));
                    w.cell(lam).cell(num(pr["rho12_measured_abs"])).cell(num(pr["rho12_tls_abs"])).cell(num(pr["rho12_weak_abs"]))
                        .cell(num(pr["rho12_measured"][0])).cell(num(pr["rho12_measured"][1])).cell(num(pr["rho12_tls"][0]))
                        .cell(num(pr["rho12_weak"][0])).cell(pr["rho11"].get<double>()).cell(pr["rho22"].get<double>())
                        .cell(num(pr["rel_error_tls"])).cell(num(pr["rel_error_weak"])).cell(pr["h0"].get<double>())
                        .cell(pr["h1"].get<double>()).cell(num(pj["delta_h"]["ratio"]))
                        .cell(has_w ? pj["widths"]["w_eps_max"].get<double>() : std::numeric_limits<double>::quiet_NaN())
                        .cell(pj["effective_region"]["delta_e"].get<double>()).cell(pj["measured_source"].get<std::string>())
                        .end_row();
                }
                files.push_back(csv_path);
                std::erase_if(reports, [](const PredictionReport& p) { return !(p.lambda > 0.0); });
                json entry = {{"q_s", q},
                              {"interaction_kind", to_string(kind)},
                              {"lambda_c", to_json(lambda_c_scan(reports, cfg.analysis.eps_c))},
                              {"lambda_h", to_json(lambda_h_scan(ratios, cfg.analysis.eps_h))},
                              {"lambda_h_includes_widths", ratios_complete}};
                row["entries"].push_back(entry);
            }
        }
        rows.push_back(row);
    }
    const json table = {{"config_hash", m.config_hash},
                        {"code_version", m.code_version},
                        {"seed", cfg.dynamics.seed},
                        {"eps_c", cfg.analysis.eps_c},
                        {"eps_h", cfg.analysis.eps_h},
                        {"rows", rows}};
    const auto table_path = opt.out / "table.json";
    write_json(table_path, table);
    const auto txt_path = opt.out / "table.txt";
    write_text_atomic(txt_path, format_table(rows));
    files.push_back(table_path);
    files.push_back(txt_path);
    m.tasks["summary"] = TaskRecord{"done", 0.0, {}, ""};
    for (const auto& f : files) m.add_artifact("summary", opt.out, f);
    m.save(opt.out);
    if (!failures.empty()) {
        std::string msg = "sweep finished with failed points:";
        for (const auto& f : failures) msg += "\n  " + f;
        throw NumericalError(msg);
    }
    return table;
}

void cmd_ef_width(const ExperimentConfig& base, const CommandOptions& opt, Workspace& ws) {
    const ExperimentConfig cfg = with_seed(base, opt);
    RunManifest m = open_manifest(opt.out, "ef-width", config_hash(cfg));
    write_config_copy(cfg, opt.out, m);
    const auto points = grid_points(cfg);
    std::vector<std::optional<WidthResult>> results(points.size());
    std::mutex mm;
    parallel_for(points.size(), opt.workers, [&](std::size_t k) {
        const std::string task = "width/" + points[k].id();
        const std::size_t dim = std::size_t{2} << points[k].n_sites;
        if (dim > cfg.limits.total_dim_cap) {
            std::lock_guard lock(mm);
            m.tasks[task] = TaskRecord{"skipped", 0.0, {}, "total dimension " + std::to_string(dim) + " above cap"};
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        results[k] = run_widths(cfg, points[k], ws);
        const auto path = opt.out / "widths" / (points[k].id() + ".csv");
        {
            CsvWriter w(path, "ef-widths", {"n", "energy", "population", "width"});
            for (const auto& s : results[k]->report.per_state)
                w.cell(static_cast<long long>(s.n)).cell(s.energy).cell(s.population).cell(s.width).end_row();
        }
        std::lock_guard lock(mm);
        m.tasks[task] = TaskRecord{"done", seconds_since(t0), {}, ""};
        m.add_artifact(task, opt.out, path);
        m.save(opt.out);
    });
    const auto summary = opt.out / "w_max.csv";
    {
        CsvWriter w(summary, "w-max",
                    {"n_sites", "q_s", "interaction_kind", "lambda", "w_eps_max", "relevant_states", "participation", "delta_e"});
        for (std::size_t k = 0; k < points.size(); ++k) {
            if (!results[k]) continue;
            const auto& r = *results[k];
            w.cell(static_cast<long long>(r.spec.n_sites)).cell(r.spec.q_s).cell(to_string(r.spec.kind)).cell(r.spec.lambda)
                .cell(r.report.w_eps_max).cell(static_cast<long long>(r.report.per_state.size())).cell(r.participation)
                .cell(r.region.delta_e).end_row();
        }
    }
    m.tasks["summary"] = TaskRecord{"done", 0.0, {}, ""};
    m.add_artifact("summary", opt.out, summary);
    m.save(opt.out);
}

std::string format_table(const json& rows) {
    std::vector<std::string> header{"N"};
    std::vector<std::vector<std::string>> cells;
    bool header_done = false;
    auto show = [](const json& scan) {
        return scan["value"].is_null() ? std::string("None") : compact(scan["value"].get<double>());
    };
    for (const auto& row : rows) {
        std::vector<std::string> line{std::to_string(row["n_sites"].get<int>())};
        for (const auto& e : row["entries"]) {
            if (!header_done) {
                const std::string tag = "q_s=" + compact(e["q_s"].get<double>()) + "," + e["interaction_kind"].get<std::string>();
                header.push_back("lambda_c(" + tag + ")");
                header.push_back("lambda_h(" + tag + ")");
            }
            line.push_back(show(e["lambda_c"]));
            line.push_back(show(e["lambda_h"]));
        }
        header_done = true;
        cells.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& l : cells)
        for (std::size_t c = 0; c < l.size() && c < width.size(); ++c) width[c] = std::max(width[c], l[c].size());
    std::ostringstream s;
    auto emit = [&](const std::vector<std::string>& l) {
        for (std::size_t c = 0; c < l.size(); ++c) s << (c ? " | " : "") << std::setw(static_cast<int>(width[c])) << l[c];
        s << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w + 3;
    s << std::string(total > 3 ? total - 3 : 0, '-') << '\n';
    for (const auto& l : cells) emit(l);
    return s.str();
}

ReportResult cmd_report(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir)) throw ConfigError(run_dir.string() + " is not a directory");
    std::vector<fs::path> dirs;
    if (fs::exists(RunManifest::path_in(run_dir))) dirs.push_back(run_dir);
    for (const auto& e : fs::recursive_directory_iterator(run_dir))
        if (e.is_regular_file() && e.path().filename() == "manifest.json" && e.path().parent_path() != run_dir)
            dirs.push_back(e.path().parent_path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ConfigError("no run manifests under " + run_dir.string());

    ReportResult out;
    json runs = json::array();
    json rows = json::array();
    std::set<std::string> versions, hashes;
    for (const auto& d : dirs) {
        const RunManifest m = RunManifest::load(d);
        versions.insert(m.code_version);
        hashes.insert(m.config_hash);
        std::size_t done = 0, failed = 0, skipped = 0;
        for (const auto& [id, t] : m.tasks) {
            done += t.status == "done";
            failed += t.status == "failed";
            skipped += t.status == "skipped";
        }
        runs.push_back({{"dir", fs::relative(d, run_dir).generic_string()},
                        {"command", m.command},
                        {"config_hash", m.config_hash},
                        {"code_version", m.code_version},
                        {"tasks_done", done},
                        {"tasks_failed", failed},
                        {"tasks_skipped", skipped}});
        if (fs::exists(d / "table.json")) {
            const json t = read_json(d / "table.json");
            for (const auto& r : t["rows"]) rows.push_back(r);
        }
    }
    if (versions.size() > 1) {
        std::string msg = "runs come from different code versions:";
        for (const auto& v : versions) msg += " [" + v + "]";
        out.warnings.push_back(msg);
    }
    if (hashes.size() > 1) {
        std::string msg = "runs use different configurations:";
        for (const auto& h : hashes) msg += " " + h;
        out.warnings.push_back(msg);
    }
    out.summary = {{"runs", runs}, {"rows", rows}, {"warnings", out.warnings}};
    out.table = rows.empty() ? std::string("(no sweep tables found)\n") : format_table(rows);
    return out;
}

}  // namespace ethlab
