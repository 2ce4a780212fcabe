#include "perturb/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "perturb/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace perturb {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_list.empty()) throw std::invalid_argument("config: empty n list");
    for (int n : n_list)
        if (n < 1) throw std::invalid_argument("config: n < 1");
    if (alpha <= 0.0 || alpha >= 1.0) throw std::invalid_argument("config: alpha outside (0,1)");
    if (delta_max < 2) throw std::invalid_argument("config: delta_max < 2");
    if (c_grid.empty()) throw std::invalid_argument("config: empty c grid");
    if (!std::is_sorted(c_grid.begin(), c_grid.end()))
        throw std::invalid_argument("config: c grid not ascending");
    for (double c : c_grid)
        if (c < 0.0) throw std::invalid_argument("config: negative c");
    if (trials < 0) throw std::invalid_argument("config: negative trials");
    if (mode != "embed" && mode != "calibrate" && mode != "certify")
        throw std::invalid_argument("config: unknown mode " + mode);
    double split = phase_split[0] + phase_split[1] + phase_split[2] + phase_split[3];
    if (std::abs(split - 1.0) > 1e-9)
        throw std::invalid_argument("config: phase split must sum to 1");
    if (calibrate_target <= 0.0 || calibrate_target >= 1.0)
        throw std::invalid_argument("config: calibrate target outside (0,1)");
}

PipelineConfig ExperimentConfig::pipeline_config() const {
    PipelineConfig pc;
    pc.alpha = alpha;
    pc.delta_max = delta_max;
    pc.lambda = lambda;
    pc.k = k;
    pc.phase_split = phase_split;
    pc.reg = RegularityParams{epsilon, delta, witness_budget};
    pc.target_cluster_size = target_cluster_size;
    pc.xi = xi;
    pc.parallel_cert = threads != 1;
    return pc;
}

std::pair<double, double> wilson_interval(int successes, int trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    double p = static_cast<double>(successes) / trials;
    double z2 = z * z;
    double denom = 1.0 + z2 / trials;
    double center = (p + z2 / (2.0 * trials)) / denom;
    double half = z * std::sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Graph make_host(const std::string& host_spec, int n, double alpha, std::uint64_t seed) {
    if (host_spec.rfind("gnp:", 0) == 0) {
        double p = std::stod(host_spec.substr(4));
        for (int attempt = 0; attempt < 100; ++attempt) {
            Graph g = generate_gnp(n, p, derive_seed(seed, 0x686f7374, attempt));
            if (n == 0 || min_degree(g) + 1e-9 >= alpha * n) return g;
        }
        throw std::runtime_error("make_host: could not reach min degree alpha*n at p=" +
                                 std::to_string(p));
    }
    if (host_spec.rfind("bipartite:", 0) == 0) {
        std::string rest = host_spec.substr(10);
        auto colon = rest.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("host spec: bipartite:<a>:<b>");
        double a = std::stod(rest.substr(0, colon));
        double b = std::stod(rest.substr(colon + 1));
        int na = static_cast<int>(std::lround(n * a / (a + b)));
        na = std::max(1, std::min(n - 1, na));
        return complete_bipartite(na, n - na);
    }
    if (host_spec.rfind("file:", 0) == 0) return load_graph_file(host_spec.substr(5));
    throw std::invalid_argument("unknown host spec: " + host_spec);
}

Tree make_tree(const std::string& tree_spec, int n, int delta_max, std::uint64_t seed) {
    if (tree_spec.rfind("file:", 0) == 0) return load_tree_file(tree_spec.substr(5));
    return generate_bounded_tree(n, delta_max, tree_shape_from_string(tree_spec), seed);
}

TrialReport run_trial(const ExperimentConfig& cfg, int n, double c, std::uint64_t trial_seed) {
    Graph host = make_host(cfg.host_spec, n, cfg.alpha, derive_seed(trial_seed, 1));
    int host_n = host.vertex_count();
    Tree tree = make_tree(cfg.tree_spec, host_n, cfg.delta_max, derive_seed(trial_seed, 2));
    PerturbationPlan plan =
        PerturbationPlan::from_c(c, cfg.phase_split, host_n, derive_seed(trial_seed, 3));
    PipelineConfig pc = cfg.pipeline_config();
    pc.c = c;
    auto outcome = embed_spanning_tree(tree, host, plan, pc, derive_seed(trial_seed, 4));
    // harness-level re-validation: success implies the validator agreed
    if (outcome.report.success && !outcome.report.validated) outcome.report.success = false;
    return outcome.report;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result;

    std::vector<std::pair<int, double>> cells;
    for (int n : cfg.n_list)
        for (double c : cfg.c_grid) cells.emplace_back(n, c);

    for (std::size_t cell = 0; cell < cells.size(); ++cell) {
        auto [n, c] = cells[cell];
        CellResult cr;
        cr.n = n;
        cr.c = c;
        cr.trials = cfg.trials;
        cr.reports.resize(cfg.trials);
        if (cfg.mode == "certify") {
            // partition-only trials: build the host and certify a partition
            for (int trial = 0; trial < cfg.trials; ++trial) {
                std::uint64_t ts = derive_seed(cfg.seed, cell, trial);
                auto t0 = std::chrono::steady_clock::now();
                Graph host = make_host(cfg.host_spec, n, cfg.alpha, derive_seed(ts, 1));
                RegularityParams params{cfg.epsilon, cfg.delta, cfg.witness_budget};
                int target = cfg.target_cluster_size > 0 ? cfg.target_cluster_size
                                                         : std::max(8, host.vertex_count() / 4);
                auto part = build_partition(host, cfg.alpha, target, params, derive_seed(ts, 2),
                                            -1.0, cfg.threads != 1);
                TrialReport rep;
                rep.n = host.vertex_count();
                rep.alpha = cfg.alpha;
                rep.c = c;
                rep.seed = ts;
                rep.case_taken = "certify";
                rep.success = part.partition.has_value();
                rep.validated = rep.success;
                if (part.partition) {
                    rep.rho = part.partition->rho;
                    rep.q = part.partition->q;
                    rep.stages.push_back({"partition", true, "", 0});
                } else {
                    rep.stages.push_back({"partition", false, part.failed_step, 0});
                }
                rep.wall_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
                cr.reports[trial] = std::move(rep);
            }
        } else {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads( \
        cfg.threads > 0 ? cfg.threads : omp_get_max_threads())
#endif
            for (int trial = 0; trial < cfg.trials; ++trial) {
                std::uint64_t ts = derive_seed(cfg.seed, cell, trial);
                cr.reports[trial] = run_trial(cfg, n, c, ts);
            }
        }
        double ms = 0.0;
        for (const auto& rep : cr.reports) {
            if (rep.success) ++cr.successes;
            ms += rep.wall_ms;
        }
        cr.rate = cfg.trials > 0 ? static_cast<double>(cr.successes) / cfg.trials : 0.0;
        std::tie(cr.wilson_lo, cr.wilson_hi) = wilson_interval(cr.successes, cfg.trials);
        cr.mean_ms = cfg.trials > 0 ? ms / cfg.trials : 0.0;
        result.cells.push_back(std::move(cr));
    }

    std::ostringstream csv;
    csv << "n,alpha,delta_max,tree_shape,k,c,trials,successes,rate,wilson_lo,wilson_hi,mean_ms\n";
    for (const auto& cr : result.cells) {
        csv << cr.n << ',' << fmt(cfg.alpha) << ',' << cfg.delta_max << ',' << cfg.tree_spec << ','
            << cfg.k << ',' << fmt(cr.c) << ',' << cr.trials << ',' << cr.successes << ','
            << fmt(cr.rate) << ',' << fmt(cr.wilson_lo) << ',' << fmt(cr.wilson_hi) << ','
            << fmt(cfg.timing_in_csv ? cr.mean_ms : 0.0) << '\n';
    }
    result.csv = csv.str();

    nlohmann::json summary;
    summary["config"] = {{"host", cfg.host_spec},
                         {"n", cfg.n_list},
                         {"alpha", cfg.alpha},
                         {"delta_max", cfg.delta_max},
                         {"tree", cfg.tree_spec},
                         {"k", cfg.k},
                         {"c_grid", cfg.c_grid},
                         {"trials", cfg.trials},
                         {"seed", cfg.seed},
                         {"mode", cfg.mode},
                         {"lambda", cfg.lambda},
                         {"phase_split", cfg.phase_split},
                         {"epsilon", cfg.epsilon},
                         {"delta", cfg.delta},
                         {"witness_budget", cfg.witness_budget}};
    summary["timestamp"] = static_cast<long long>(std::time(nullptr));
    summary["cells"] = nlohmann::json::array();
    for (const auto& cr : result.cells) {
        summary["cells"].push_back({{"n", cr.n},
                                    {"c", cr.c},
                                    {"trials", cr.trials},
                                    {"successes", cr.successes},
                                    {"rate", cr.rate},
                                    {"wilson_lo", cr.wilson_lo},
                                    {"wilson_hi", cr.wilson_hi},
                                    {"mean_ms", cr.mean_ms}});
    }
    result.summary_json = summary.dump(2);
    return result;
}

void write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "results.csv", std::ios::binary);
        out << result.csv;
    }
    {
        std::ofstream out(dir / "summary.json", std::ios::binary);
        out << result.summary_json << '\n';
    }
    {
        std::ofstream out(dir / "trials.jsonl", std::ios::binary);
        for (const auto& cell : result.cells)
            for (const auto& rep : cell.reports) out << rep.to_json() << '\n';
    }
}

CalibrationResult calibrate_over_grid(const std::vector<double>& grid, double target,
                                      const std::function<double(double)>& rate_at) {
    CalibrationResult res;
    if (grid.empty()) return res;
    std::map<std::size_t, double> memo;
    auto probe = [&](std::size_t idx) {
        auto it = memo.find(idx);
        if (it != memo.end()) return it->second;
        double rate = rate_at(grid[idx]);
        memo[idx] = rate;
        res.probes.emplace_back(grid[idx], rate);
        return rate;
    };
    if (probe(grid.size() - 1) < target) {
        res.reached = false;
        res.c_star = grid.back();
        return res;
    }
    std::size_t lo = 0, hi = grid.size() - 1;
    if (probe(0) >= target) {
        res.reached = true;
        res.c_star = grid.front();
        return res;
    }
    // invariant: rate(lo) < target <= rate(hi)
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        if (probe(mid) >= target)
            hi = mid;
        else
            lo = mid;
    }
    res.reached = true;
    res.c_star = grid[hi];
    return res;
}

CalibrationResult calibrate(const ExperimentConfig& cfg) {
    cfg.validate();
    int n = cfg.n_list.front();
    auto res = calibrate_over_grid(cfg.c_grid, cfg.calibrate_target, [&](double c) {
        ExperimentConfig probe = cfg;
        probe.mode = "embed";
        probe.n_list = {n};
        probe.c_grid = {c};
        auto r = run_experiment(probe);
        return r.cells.front().rate;
    });
    nlohmann::json j;
    j["target"] = cfg.calibrate_target;
    j["reached"] = res.reached;
    j["c_star"] = res.c_star;
    j["probes"] = nlohmann::json::array();
    for (auto [c, rate] : res.probes) j["probes"].push_back({{"c", c}, {"rate", rate}});
    res.record_json = j.dump(2);
    return res;
}

}  // namespace perturb
