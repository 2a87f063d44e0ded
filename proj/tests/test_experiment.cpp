#include "ethlab/config.hpp"
#include "ethlab/csv.hpp"
#include "ethlab/eigen_cache.hpp"
#include "ethlab/errors.hpp"
#include "ethlab/experiment.hpp"
#include "ethlab/hash.hpp"
#include "ethlab/manifest.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace ethlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ethlab_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig small_config() {
    return config_from_json(json::parse(R"({
      "chain": {"n_sites": 6},
      "coupling": {"coupling_site": 6},
      "sweep": {"n_grid": [6], "lambda_grid": [0.01, 0.05, 0.2]},
      "dynamics": {"t_max": 200},
      "analysis": {"observable_site": 6}
    })"));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

json without_wall(json m) {
    for (auto& [k, t] : m["tasks"].items()) t.erase("wall_seconds");
    return m;
}

}  // namespace

TEST(Config, DefaultsAndRoundTrip) {
    const auto cfg = config_from_json(json::object());
    EXPECT_EQ(cfg.chain.n_sites, 12);
    EXPECT_DOUBLE_EQ(cfg.chain.b_x, 0.9);
    EXPECT_DOUBLE_EQ(cfg.coupling.q_s, 0.05);
    EXPECT_EQ(cfg.coupling.coupling_site, 7);
    EXPECT_DOUBLE_EQ(cfg.analysis.epsilon, 0.05);
    EXPECT_DOUBLE_EQ(cfg.analysis.eps_c, 0.1);
    EXPECT_NEAR(cfg.c0().norm(), 1.0, 1e-15);
    const auto again = config_from_json(to_json(cfg));
    EXPECT_EQ(config_hash(again), config_hash(cfg));
    auto moved = cfg;
    moved.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(moved), config_hash(cfg));
    moved.dynamics.seed = 2;
    EXPECT_NE(config_hash(moved), config_hash(cfg));
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(config_from_json(json::parse(R"({"chain": {"sites": 4}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"sweep": {"lambda_grid": []}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"sweep": {"n_grid": []}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"sweep": {"lambda_grid": [0.1, 0.01]}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"coupling": {"interaction_kind": "SzSz"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"coupling": {"interaction_kind": "Generic"}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"chain": {"n_sites": 4}})")), ConfigError);  // coupling site 7
    EXPECT_THROW(config_from_json(json::parse(R"({"initial": {"c0": [0, 0]}})")), ConfigError);
    EXPECT_THROW(config_from_json(json::parse(R"({"chain": {"n_sites": "ten"}})")), ConfigError);
}

TEST(Config, ComplexAmplitudesAndGenericTerms) {
    const auto cfg = config_from_json(json::parse(R"({
      "initial": {"c0": [[0.6, 0.0], [0.0, 0.8]], "state_kind": "complex_gaussian"},
      "coupling": {"interaction_kind": "Generic",
                   "terms": [{"lambda": 1.0, "qubit_op": "x", "site": 7, "axis": "x"},
                             {"lambda": 0.5, "qubit_op": "z", "site": 3, "axis": "z"}]}
    })"));
    EXPECT_EQ(cfg.c0()[1], cplx(0, 0.8));
    EXPECT_EQ(cfg.dynamics.state_kind, StateKind::ComplexGaussian);
    ASSERT_EQ(cfg.coupling.terms.size(), 2u);
    EXPECT_EQ(cfg.coupling.terms[1].axis, Axis::Z);
}

TEST(Csv, VersionedHeader) {
    const auto dir = scratch("csv");
    {
        CsvWriter w(dir / "a.csv", "demo", {"x", "y"});
        w.row({1.0, 0.1});
        w.cell(2.0).cell(std::string("z")).end_row();
    }
    const auto text = slurp(dir / "a.csv");
    EXPECT_EQ(text.rfind("# ethlab:demo v1\nx,y\n1,0.10000000000000001\n", 0), 0u);
    fs::remove_all(dir);
}

TEST(Manifest, ChecksumsGuardCompletion) {
    const auto dir = scratch("manifest");
    write_text_atomic(dir / "out.txt", "hello\n");
    RunManifest m;
    m.command = "sweep";
    m.config_hash = "abc";
    m.code_version = code_version();
    m.tasks["t"].status = "done";
    m.add_artifact("t", dir, dir / "out.txt");
    EXPECT_EQ(m.tasks["t"].artifacts[0].sha256, sha256_hex("hello\n"));
    EXPECT_TRUE(m.task_complete("t", dir));
    m.save(dir);
    const auto back = RunManifest::load(dir);
    EXPECT_EQ(back.to_json(), m.to_json());
    write_text_atomic(dir / "out.txt", "tampered\n");
    EXPECT_FALSE(back.task_complete("t", dir));
    EXPECT_FALSE(back.task_complete("missing", dir));
    fs::remove_all(dir);
}

TEST(Hash, KnownDigest) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(EigenCache, RoundTrip) {
    const auto dir = scratch("cache");
    ChainConfig chain;
    chain.n_sites = 6;
    const auto eig = eigh(build_env_hamiltonian(chain).to_dense());
    EigenCache cache(dir);
    const auto key = env_cache_key(chain);
    EXPECT_FALSE(cache.contains(key));
    cache.store(key, eig, {{"note", "test"}});
    EXPECT_TRUE(cache.contains(key));
    const auto back = cache.load(key);
    ASSERT_TRUE(back);
    EXPECT_EQ(back->energies, eig.energies);
    EXPECT_EQ(back->vectors, eig.vectors);
    const json side = json::parse(slurp(dir / (key + ".json")));
    EXPECT_EQ(side["dim"], 64);

    // Workspace results with and without the cache agree.
    Workspace cached(dir), fresh(std::nullopt);
    const auto a = cached.env(chain, 8192);
    const auto b = fresh.env(chain, 8192);
    EXPECT_LE((a->eig.vectors - b->eig.vectors).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(cached.env(chain, 8192).get(), a.get());
    fs::remove_all(dir);
}

TEST(Workspace, RefusesOversizedProblems) {
    Workspace ws(std::nullopt);
    ChainConfig chain;
    chain.n_sites = 10;
    try {
        ws.env(chain, 512);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("GiB"), std::string::npos);
    }
}

TEST(Commands, SpectrumTooFewLevels) {
    auto cfg = config_from_json(json::parse(R"({"chain": {"n_sites": 2, "defects": [{"site": 1, "strength": 1.11}]},
                                                 "coupling": {"coupling_site": 1}, "analysis": {"observable_site": 1},
                                                 "sweep": {"n_grid": [2]}})"));
    const auto dir = scratch("spec2");
    Workspace ws(std::nullopt);
    try {
        cmd_spectrum(cfg, {dir, std::nullopt, 1, std::nullopt}, ws);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("too few levels"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(Commands, IntegrableControlIsPoissonLike) {
    // Free spins in incommensurate fields: integrable, no level repulsion. The
    // additive spectrum is not exactly Poisson, so <r> sits somewhat below 0.386.
    auto cfg = config_from_json(json::parse(R"({"chain": {"n_sites": 10, "j_z": 0.0,
        "defects": [{"site": 1, "strength": 0.31}, {"site": 2, "strength": 0.77}, {"site": 3, "strength": 1.13},
                    {"site": 4, "strength": 0.52}, {"site": 5, "strength": 1.41}, {"site": 6, "strength": 0.23},
                    {"site": 7, "strength": 0.95}, {"site": 8, "strength": 1.71}, {"site": 9, "strength": 0.64},
                    {"site": 10, "strength": 1.27}]},
        "sweep": {"n_grid": [10]}})"));
    Workspace ws(std::nullopt);
    const auto r = run_spectrum(cfg.chain, cfg.analysis, ws, cfg.limits.env_dim_cap);
    EXPECT_NEAR(r.stats.mean_r, 0.39, 0.06);
    EXPECT_GT(r.wd_distance, 0.2);
}

TEST(Commands, IdentityObservableHasNoFluctuations) {
    auto cfg = config_from_json(json::parse(R"({"analysis": {"eth_shell": {"e0": -1.0, "delta_e0": 0.6}}})"));
    Workspace ws(std::nullopt);
    const auto id = SparseHamiltonian::identity(std::size_t{1} << 10);
    const auto r = run_eth_check(cfg, 10, ws, &id);
    const auto& o = r.observables.back();
    EXPECT_EQ(o.name, "custom");
    EXPECT_EQ(o.stats.sigma_d, 0.0);
    EXPECT_LE(o.stats.sigma_nd, 1e-12);
    EXPECT_NEAR(o.stats.mu, 1.0, 1e-12);
    EXPECT_EQ(o.stats.gauss_stat_d, 0.0);
    ASSERT_EQ(r.delta_h.size(), 1u);
    EXPECT_GT(r.delta_h[0].result.n_levels, 0u);
}

TEST(Commands, EvolveUncoupledAndDeterministic) {
    const auto cfg = small_config();
    const auto d1 = scratch("ev1"), d2 = scratch("ev2");
    Workspace ws(std::nullopt);
    const auto r0 = cmd_evolve(cfg, {d1, std::nullopt, 1, 0.0}, ws);
    EXPECT_LE(std::abs(r0.prediction.rho12_measured), 1e-10);
    ASSERT_TRUE(r0.rho_time_average);
    // Finite-window average of a pure phase: bounded by 2 |c1 c2| / (q_s T).
    EXPECT_LE(std::abs((*r0.rho_time_average)(0, 1)), 2 * 0.44 / (0.05 * 200));
    fs::remove_all(d1);
    fs::create_directories(d1);

    Workspace ws2(std::nullopt);
    cmd_evolve(cfg, {d1, 4, 1, 0.05}, ws);
    cmd_evolve(cfg, {d2, 4, 1, 0.05}, ws2);
    for (const char* f : {"trajectory.csv", "average.json", "ef_widths.csv"})
        EXPECT_EQ(sha256_file(d1 / f), sha256_file(d2 / f)) << f;
    const auto traj = slurp(d1 / "trajectory.csv");
    EXPECT_NE(traj.find("time,re_rho11,im_rho11"), std::string::npos);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(Commands, SweepIsResumableAndReported) {
    const auto cfg = small_config();
    const auto full = scratch("sweep_full"), part = scratch("sweep_part");
    {
        Workspace ws(std::nullopt);
        const auto table = cmd_sweep(cfg, {full, std::nullopt, 2, std::nullopt}, ws);
        ASSERT_EQ(table["rows"].size(), 1u);
    }
    {
        Workspace ws(std::nullopt);
        cmd_sweep(cfg, {part, std::nullopt, 1, std::nullopt}, ws);
        // Simulate an interruption: one point lost, another corrupted.
        const auto m = RunManifest::load(part);
        std::vector<std::string> points;
        for (const auto& [id, t] : m.tasks)
            if (id.rfind("point/", 0) == 0) points.push_back(id);
        ASSERT_EQ(points.size(), 3u);
        auto edited = m;
        edited.tasks.erase(points[0]);
        edited.tasks.erase("summary");
        edited.save(part);
        write_text_atomic(part / edited.tasks[points[1]].artifacts[0].path, "{}");
        fs::remove(part / "table.json");
    }
    {
        Workspace ws(std::nullopt);
        cmd_sweep(cfg, {part, std::nullopt, 1, std::nullopt}, ws);
    }
    EXPECT_EQ(without_wall(RunManifest::load(full).to_json()), without_wall(RunManifest::load(part).to_json()));

    auto other = cfg;
    other.dynamics.seed = 9;
    Workspace ws(std::nullopt);
    EXPECT_THROW(cmd_sweep(other, {part, std::nullopt, 1, std::nullopt}, ws), ConfigError);

    const auto rep = cmd_report(full);
    EXPECT_EQ(rep.summary["rows"].size(), 1u);
    EXPECT_TRUE(rep.warnings.empty());
    EXPECT_NE(rep.table.find("lambda_c"), std::string::npos);

    // A second run from a different code version in the same tree.
    const auto tree = scratch("report_tree");
    fs::copy(full, tree / "a", fs::copy_options::recursive);
    fs::copy(full, tree / "b", fs::copy_options::recursive);
    auto m = RunManifest::load(tree / "b");
    m.code_version = "ethlab 0.0.1";
    m.save(tree / "b");
    const auto mixed = cmd_report(tree);
    EXPECT_EQ(mixed.summary["rows"].size(), 2u);
    ASSERT_FALSE(mixed.warnings.empty());
    EXPECT_NE(mixed.warnings[0].find("ethlab 0.0.1"), std::string::npos);
    EXPECT_NE(mixed.warnings[0].find(code_version()), std::string::npos);
    for (const auto& d : {full, part, tree}) fs::remove_all(d);
}

TEST(Points, FluctuationBoundAndCommutatorDiscrimination) {
    auto cfg = config_from_json(json::parse(R"({"chain": {"n_sites": 8}, "sweep": {"n_grid": [8]}})"));
    Workspace ws(std::nullopt);
    int within = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = run_point(cfg, {8, 0.05, InteractionKind::SxSx, 0.05, seed}, ws);
        ASSERT_TRUE(r.fluctuation_bound);
        within += r.f_deviation <= 3.0 * std::sqrt(*r.fluctuation_bound);
        EXPECT_LE(r.stationarity_residual, 1e-10);
        EXPECT_EQ(r.measured_source, "diagonal_ensemble");
    }
    EXPECT_EQ(within, 5);

    const auto r = run_point(cfg, {8, 0.05, InteractionKind::SxSx, 0.01, 1}, ws);
    const Eigen::Matrix2d h_s = Eigen::Vector2d(-0.025, 0.025).asDiagonal();
    const Eigen::Matrix2d his = qubit_operator(QubitOp::X);
    const double h0 = r.prediction.h0;
    const double right = commutator_residual(h_s + 0.01 * h0 * his, r.rho).normalized;
    const double wrong = commutator_residual(h_s - 0.01 * h0 * his, r.rho).normalized;
    EXPECT_LT(right, wrong);
    EXPECT_NEAR(right, r.prediction.commutator_residual, 1e-14);
}
