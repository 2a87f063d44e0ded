#include "ethlab/config.hpp"

#include "ethlab/errors.hpp"
#include "ethlab/hash.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace ethlab {

using nlohmann::json;

namespace {

void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

ShellSpec shell_from_json(const json& j, const std::string& where, ShellSpec s) {
    allow_keys(j, where, {"e0", "delta_e0"});
    read(j, "e0", s.e0, where);
    read(j, "delta_e0", s.delta_e0, where);
    return s;
}

std::complex<double> complex_from_json(const json& v) {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
    throw ConfigError("amplitude must be a number or a [re, im] pair");
}

StateKind state_kind_from_string(const std::string& s) {
    if (s == "random_phase") return StateKind::RandomPhase;
    if (s == "complex_gaussian") return StateKind::ComplexGaussian;
    throw ConfigError("unknown state kind '" + s + "'");
}

MeasureMode mode_from_string(const std::string& s) {
    if (s == "auto") return MeasureMode::Auto;
    if (s == "time_average") return MeasureMode::TimeAverage;
    if (s == "both") return MeasureMode::Both;
    throw ConfigError("unknown measurement mode '" + s + "'");
}

}  // namespace

ShellSpec ShellConfig::for_n(int n_sites) const {
    ShellSpec s = spec;
    if (rule == E0Rule::PerSite) s.e0 = spec.e0 * n_sites / reference_n;
    return s;
}

std::string to_string(E0Rule r) { return r == E0Rule::Fixed ? "fixed" : "per_site"; }

std::string to_string(MeasureMode m) {
    switch (m) {
        case MeasureMode::Auto: return "auto";
        case MeasureMode::TimeAverage: return "time_average";
        case MeasureMode::Both: return "both";
    }
    return "?";
}

std::string to_string(StateKind k) { return k == StateKind::RandomPhase ? "random_phase" : "complex_gaussian"; }

void ExperimentConfig::validate() const {
    chain.validate();
    coupling.validate(chain);
    shell.spec.validate();
    if (shell.reference_n < 1) throw ConfigError("shell.reference_n must be positive");
    if (c0_raw.size() != 2) throw ConfigError("initial.c0 must have two amplitudes");
    (void)c0();
    if (sweep.lambda_grid.empty()) throw ConfigError("sweep.lambda_grid is empty");
    if (sweep.n_grid.empty()) throw ConfigError("sweep.n_grid is empty");
    if (sweep.q_s.empty()) throw ConfigError("sweep.q_s is empty");
    if (sweep.kinds.empty()) throw ConfigError("sweep.kinds is empty");
    for (double l : sweep.lambda_grid)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda values must be finite and nonnegative");
    for (std::size_t k = 1; k < sweep.lambda_grid.size(); ++k)
        if (!(sweep.lambda_grid[k] > sweep.lambda_grid[k - 1])) throw ConfigError("sweep.lambda_grid must be ascending");
    for (int n : sweep.n_grid) {
        ChainConfig c = chain;
        c.n_sites = n;
        c.validate();
        coupling.validate(c);
        if (analysis.observable_site > n) throw ConfigError("observable site exceeds chain length " + std::to_string(n));
    }
    for (double q : sweep.q_s)
        if (!(q >= 0.0)) throw ConfigError("q_s values must be nonnegative");
    if (!(dynamics.t_max > dynamics.t_min && dynamics.t_min >= 0.0)) throw ConfigError("dynamics needs t_max > t_min >= 0");
    if (!(dynamics.dt_sample > 0.0 && dynamics.step > 0.0)) throw ConfigError("dynamics steps must be positive");
    if (dynamics.krylov_dim < 2) throw ConfigError("krylov_dim must be at least 2");
    if (!(analysis.epsilon > 0.0 && analysis.epsilon < 0.5)) throw ConfigError("analysis.epsilon must lie in (0, 0.5)");
    if (!(analysis.window_width > 0.0)) throw ConfigError("analysis.window_width must be positive");
    if (!(analysis.eps_h > 0.0 && analysis.eps_c > 0.0)) throw ConfigError("eps_h and eps_c must be positive");
    analysis.eth_shell.validate();
    if (analysis.eth_min_levels < 3) throw ConfigError("analysis.eth_min_levels must be at least 3");
    if (!(analysis.omega_bin > 0.0 && analysis.omega_max > 0.0)) throw ConfigError("omega binning must be positive");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    allow_keys(j, "config", {"chain", "coupling", "shell", "initial", "sweep", "dynamics", "analysis", "limits", "output_dir"});

    if (j.contains("chain")) {
        const auto& c = j["chain"];
        allow_keys(c, "chain", {"n_sites", "b_x", "j_z", "defects", "periodic"});
        read(c, "n_sites", cfg.chain.n_sites, "chain");
        read(c, "b_x", cfg.chain.b_x, "chain");
        read(c, "j_z", cfg.chain.j_z, "chain");
        read(c, "periodic", cfg.chain.periodic, "chain");
        if (c.contains("defects")) {
            cfg.chain.defects.clear();
            for (const auto& d : c["defects"]) {
                allow_keys(d, "chain.defects[]", {"site", "strength"});
                Defect x;
                read(d, "site", x.site, "chain.defects[]");
                read(d, "strength", x.strength, "chain.defects[]");
                cfg.chain.defects.push_back(x);
            }
        }
    }
    if (j.contains("coupling")) {
        const auto& c = j["coupling"];
        allow_keys(c, "coupling", {"q_s", "lambda", "coupling_site", "interaction_kind", "terms"});
        read(c, "q_s", cfg.coupling.q_s, "coupling");
        read(c, "lambda", cfg.coupling.lambda, "coupling");
        read(c, "coupling_site", cfg.coupling.coupling_site, "coupling");
        if (c.contains("interaction_kind")) cfg.coupling.kind = interaction_kind_from_string(c["interaction_kind"].get<std::string>());
        if (c.contains("terms")) {
            for (const auto& t : c["terms"]) {
                allow_keys(t, "coupling.terms[]", {"lambda", "qubit_op", "site", "axis"});
                InteractionTerm term;
                read(t, "lambda", term.lambda, "coupling.terms[]");
                read(t, "site", term.site, "coupling.terms[]");
                if (t.contains("qubit_op")) term.qubit_op = qubit_op_from_string(t["qubit_op"].get<std::string>());
                if (t.contains("axis")) term.axis = axis_from_string(t["axis"].get<std::string>());
                cfg.coupling.terms.push_back(term);
            }
        }
    }
    if (j.contains("shell")) {
        const auto& s = j["shell"];
        allow_keys(s, "shell", {"e0", "delta_e0", "e0_rule", "reference_n"});
        read(s, "e0", cfg.shell.spec.e0, "shell");
        read(s, "delta_e0", cfg.shell.spec.delta_e0, "shell");
        read(s, "reference_n", cfg.shell.reference_n, "shell");
        if (s.contains("e0_rule")) {
            const auto r = s["e0_rule"].get<std::string>();
            if (r == "fixed") cfg.shell.rule = E0Rule::Fixed;
            else if (r == "per_site") cfg.shell.rule = E0Rule::PerSite;
            else throw ConfigError("unknown e0_rule '" + r + "'");
        }
    }
    if (j.contains("initial")) {
        const auto& s = j["initial"];
        allow_keys(s, "initial", {"c0", "state_kind"});
        if (s.contains("c0")) {
            const auto& a = s["c0"];
            if (!a.is_array()) throw ConfigError("initial.c0 must be an array");
            cfg.c0_raw.resize(static_cast<Eigen::Index>(a.size()));
            for (std::size_t k = 0; k < a.size(); ++k) cfg.c0_raw[static_cast<Eigen::Index>(k)] = complex_from_json(a[k]);
        }
        if (s.contains("state_kind")) cfg.dynamics.state_kind = state_kind_from_string(s["state_kind"].get<std::string>());
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        allow_keys(s, "sweep", {"lambda_grid", "n_grid", "q_s", "interaction_kinds"});
        read(s, "lambda_grid", cfg.sweep.lambda_grid, "sweep");
        read(s, "n_grid", cfg.sweep.n_grid, "sweep");
        read(s, "q_s", cfg.sweep.q_s, "sweep");
        if (s.contains("interaction_kinds")) {
            cfg.sweep.kinds.clear();
            for (const auto& k : s["interaction_kinds"]) cfg.sweep.kinds.push_back(interaction_kind_from_string(k.get<std::string>()));
        }
    }
    if (j.contains("dynamics")) {
        const auto& d = j["dynamics"];
        allow_keys(d, "dynamics", {"t_min", "t_max", "dt_sample", "step", "krylov_dim", "krylov_tol", "convergence_tol",
                                    "seed", "mode"});
        read(d, "t_min", cfg.dynamics.t_min, "dynamics");
        read(d, "t_max", cfg.dynamics.t_max, "dynamics");
        read(d, "dt_sample", cfg.dynamics.dt_sample, "dynamics");
        read(d, "step", cfg.dynamics.step, "dynamics");
        read(d, "krylov_dim", cfg.dynamics.krylov_dim, "dynamics");
        read(d, "krylov_tol", cfg.dynamics.krylov_tol, "dynamics");
        read(d, "convergence_tol", cfg.dynamics.convergence_tol, "dynamics");
        read(d, "seed", cfg.dynamics.seed, "dynamics");
        if (d.contains("mode")) cfg.dynamics.mode = mode_from_string(d["mode"].get<std::string>());
    }
    if (j.contains("analysis")) {
        const auto& a = j["analysis"];
        allow_keys(a, "analysis", {"epsilon", "eps_h", "eps_c", "window_width", "observable_site", "eth_shell", "omega_bin",
                                    "omega_max", "spectral", "eth_min_levels"});
        read(a, "epsilon", cfg.analysis.epsilon, "analysis");
        read(a, "eps_h", cfg.analysis.eps_h, "analysis");
        read(a, "eps_c", cfg.analysis.eps_c, "analysis");
        read(a, "window_width", cfg.analysis.window_width, "analysis");
        read(a, "observable_site", cfg.analysis.observable_site, "analysis");
        read(a, "omega_bin", cfg.analysis.omega_bin, "analysis");
        read(a, "omega_max", cfg.analysis.omega_max, "analysis");
        read(a, "eth_min_levels", cfg.analysis.eth_min_levels, "analysis");
        if (a.contains("eth_shell")) cfg.analysis.eth_shell = shell_from_json(a["eth_shell"], "analysis.eth_shell", cfg.analysis.eth_shell);
        if (a.contains("spectral")) {
            const auto& s = a["spectral"];
            allow_keys(s, "analysis.spectral", {"fraction_lo", "fraction_hi", "unfold_window", "n_bins", "s_max", "min_levels"});
            read(s, "fraction_lo", cfg.analysis.spectral.fraction_lo, "analysis.spectral");
            read(s, "fraction_hi", cfg.analysis.spectral.fraction_hi, "analysis.spectral");
            read(s, "unfold_window", cfg.analysis.spectral.unfold_window, "analysis.spectral");
            read(s, "n_bins", cfg.analysis.spectral.n_bins, "analysis.spectral");
            read(s, "s_max", cfg.analysis.spectral.s_max, "analysis.spectral");
            read(s, "min_levels", cfg.analysis.spectral.min_levels, "analysis.spectral");
        }
    }
    if (j.contains("limits")) {
        const auto& l = j["limits"];
        allow_keys(l, "limits", {"total_dim_cap", "env_dim_cap"});
        read(l, "total_dim_cap", cfg.limits.total_dim_cap, "limits");
        read(l, "env_dim_cap", cfg.limits.env_dim_cap, "limits");
    }
    read(j, "output_dir", cfg.output_dir, "config");
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

json to_json(const ChainConfig& c) {
    json d = json::array();
    for (const auto& x : c.defects) d.push_back({{"site", x.site}, {"strength", x.strength}});
    return {{"n_sites", c.n_sites}, {"b_x", c.b_x}, {"j_z", c.j_z}, {"defects", d}, {"periodic", c.periodic}};
}

json to_json(const CouplingConfig& c) {
    json t = json::array();
    for (const auto& x : c.terms)
        t.push_back({{"lambda", x.lambda}, {"qubit_op", to_string(x.qubit_op)}, {"site", x.site}, {"axis", to_string(x.axis)}});
    return {{"q_s", c.q_s}, {"lambda", c.lambda}, {"coupling_site", c.coupling_site}, {"interaction_kind", to_string(c.kind)},
            {"terms", t}};
}

json to_json(const ShellSpec& s) { return {{"e0", s.e0}, {"delta_e0", s.delta_e0}}; }

json to_json(const ExperimentConfig& cfg) {
    json c0 = json::array();
    for (Eigen::Index k = 0; k < cfg.c0_raw.size(); ++k) c0.push_back({cfg.c0_raw[k].real(), cfg.c0_raw[k].imag()});
    json kinds = json::array();
    for (auto k : cfg.sweep.kinds) kinds.push_back(to_string(k));
    const auto& a = cfg.analysis;
    const auto& d = cfg.dynamics;
    return {
        {"chain", to_json(cfg.chain)},
        {"coupling", to_json(cfg.coupling)},
        {"shell",
         {{"e0", cfg.shell.spec.e0},
          {"delta_e0", cfg.shell.spec.delta_e0},
          {"e0_rule", to_string(cfg.shell.rule)},
          {"reference_n", cfg.shell.reference_n}}},
        {"initial", {{"c0", c0}, {"state_kind", to_string(d.state_kind)}}},
        {"sweep", {{"lambda_grid", cfg.sweep.lambda_grid}, {"n_grid", cfg.sweep.n_grid}, {"q_s", cfg.sweep.q_s}, {"interaction_kinds", kinds}}},
        {"dynamics",
         {{"t_min", d.t_min},
          {"t_max", d.t_max},
          {"dt_sample", d.dt_sample},
          {"step", d.step},
          {"krylov_dim", d.krylov_dim},
          {"krylov_tol", d.krylov_tol},
          {"convergence_tol", d.convergence_tol},
          {"seed", d.seed},
          {"mode", to_string(d.mode)}}},
        {"analysis",
         {{"epsilon", a.epsilon},
          {"eps_h", a.eps_h},
          {"eps_c", a.eps_c},
          {"window_width", a.window_width},
          {"observable_site", a.observable_site},
          {"eth_shell", to_json(a.eth_shell)},
          {"eth_min_levels", a.eth_min_levels},
          {"omega_bin", a.omega_bin},
          {"omega_max", a.omega_max},
          {"spectral",
           {{"fraction_lo", a.spectral.fraction_lo},
            {"fraction_hi", a.spectral.fraction_hi},
            {"unfold_window", a.spectral.unfold_window},
            {"n_bins", a.spectral.n_bins},
            {"s_max", a.spectral.s_max},
            {"min_levels", a.spectral.min_levels}}}}},
        {"limits", {{"total_dim_cap", cfg.limits.total_dim_cap}, {"env_dim_cap", cfg.limits.env_dim_cap}}},
        {"output_dir", cfg.output_dir},
    };
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output_dir");  // where results go does not change them
    return sha256_hex(j.dump());
}

std::string env_cache_key(const ChainConfig& chain) {
    return sha256_hex(json{{"which", "env"}, {"chain", to_json(chain)}}.dump());
}

std::string total_cache_key(const ChainConfig& chain, const CouplingConfig& coupling) {
    return sha256_hex(json{{"which", "total"}, {"chain", to_json(chain)}, {"coupling", to_json(coupling)}}.dump());
}

}  // namespace ethlab
