#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perturb/embedding.hpp"
#include "perturb/graph.hpp"
#include "perturb/regularity.hpp"
#include "perturb/tree.hpp"

namespace perturb {

struct PipelineConfig {
    double alpha = 0.35;
    int delta_max = 3;
    double lambda = 0.05;   // case dispatch threshold: leaves >= lambda*n takes case 1
    int k = 9;              // bare path length before endpoint fixing; odd, >= 9
    double c = 40.0;        // total random-edge constant; phase i gets c*phase_split[i]
    std::array<double, 4> phase_split{0.25, 0.25, 0.25, 0.25};
    int target_cluster_size = 0;  // 0 -> n/4
    RegularityParams reg{0.25, 0.15, 1000};
    double alpha_prime = -1.0;  // cluster-graph density threshold; <0 -> alpha/4
    double xi = 0.1;            // slack ratio for template path extraction
    double retry_factor = 10.0; // greedy embedding budget = retry_factor * n
    bool parallel_cert = true;
};

struct StageRecord {
    std::string name;
    bool ok = false;
    std::string detail;
    int consumed = 0;  // host vertices consumed by this stage
};

struct TrialReport {
    int n = 0;
    double alpha = 0.0;
    int delta_max = 0;
    int k = 0;
    double c = 0.0;
    std::array<double, 4> phase_split{};
    std::uint64_t seed = 0;
    std::string case_taken;  // "case1" | "case2"
    std::vector<StageRecord> stages;
    double rho = 0.0;
    int q = 0;
    bool success = false;
    bool validated = false;
    double wall_ms = 0.0;

    std::string to_json() const;
};

/// A bare path of T awaiting realization in the host: its tree endpoints and
/// interior, the current host endpoints, and the host vertices found so far.
struct PendingPath {
    int tree_u = -1, tree_v = -1;
    std::vector<int> tree_interior;  // in order u -> v
    int host_x = -1, host_y = -1;    // current special endpoints
    int bridge_x = -1, bridge_y = -1;  // length-2 intermediates from endpoint fixing
    int home = -1;                   // destination cluster-pair index after fixing
    std::vector<int> host_middle;    // interior between host_x and host_y, once found
};

/// Working state of the few-leaves pipeline between stages. Cluster id
/// convention: pair index i in [0,q), side h in {0,1}; id = 2i+h.
struct Case2State {
    int n = 0;
    int k = 0;  // current special path length
    ClusterPartition partition;
    std::vector<int> cluster_of;  // host vertex -> cluster id
    std::vector<std::array<std::vector<int>, 2>> x_sets;  // special endpoints per cluster
    std::vector<std::array<std::vector<int>, 2>> w_sets;  // free vertices per cluster
    std::vector<std::vector<int>> z;                      // pending-path ids per pair index
    std::vector<PendingPath> pending;
    Embedding forest_map;  // tree-indexed embedding of F
    std::vector<char> occupancy_in_band;  // 5-sigma hypergeometric check per cluster

    int x_count() const;
    int w_count() const;
};

struct StageStatus {
    bool ok = true;
    std::string detail;
    int consumed = 0;
};

/// Embeds the decomposition's forest into r2 and splits every cluster into
/// special endpoints and free vertices.
StageStatus stage_embed_forest(const Tree& t, const BarePathDecomposition& decomp, const Graph& r2,
                               const ClusterPartition& part, Case2State& st, std::uint64_t seed,
                               std::int64_t retry_budget);

/// Moves each special pair into a common cluster pair via disjoint length-2
/// paths (host edge into the partner's first half, r3 edge into the
/// destination's second half), then shortens k by 4.
StageStatus stage_fix_endpoints(const Graph& g, const Graph& r3, Case2State& st,
                                std::uint64_t seed);

/// The m_i / L_i arithmetic and the planned template multiset.
struct AdjustmentLedger {
    std::vector<double> m;       // min{|Z_i|, 2|W_(i,1)|/(k-1), 2|W_(i,2)|/(k-1)}
    std::vector<int> l_z, l_w;   // pairs resp. vertices to leave per index
    std::vector<int> removals;   // |Z_i| - l_z[i]
    std::vector<int> consumption;  // per cluster id: planned free-vertex consumption
    // template multiset: trace of cluster ids (length k+1) with its path count
    std::vector<std::pair<std::vector<int>, int>> templates;
    double gamma = 0.0;  // rho^-2/3 for the measured rho
    bool gamma_ok = true;
    bool feasible = true;  // per-cluster second/second-last supply suffices
};

AdjustmentLedger compute_adjustment_ledger(const Case2State& st);

/// Finds vertex-disjoint special paths with a fixed cluster trace: pairs are
/// matched to chains formed by maximum matchings between consecutive slots in
/// r4, with first/last hops through g.
struct TemplatePathsResult {
    std::vector<int> pair_ids;                // indices into `pairs`
    std::vector<std::vector<int>> paths;      // aligned host sequences x,w_1..w_{k-1},y
    bool matching_bound_ok = true;            // maximal-matching size check across slots
};

TemplatePathsResult find_template_paths(const std::vector<std::pair<int, int>>& pairs,
                                        const std::vector<std::vector<int>>& slots,
                                        const Graph& g, const Graph& r4, double delta, double xi,
                                        int desired, std::uint64_t seed);

/// Removes special paths per the ledger's templates so that afterwards
/// 2|W_i| = (k-1)|X_i| holds exactly for every cluster.
StageStatus stage_adjust_clusters(const Graph& g, const Graph& r4, Case2State& st,
                                  std::uint64_t seed, double xi, AdjustmentLedger* ledger_out);

/// Packs the remaining special pairs into k-cycles of the auxiliary
/// cluster-cycle (one pair vertex per cycle), consuming every free vertex.
StageStatus stage_complete_cycles(const Graph& g, Case2State& st, std::uint64_t seed);

/// Structural check of a completed cycle packing / special path system.
bool validate_special_paths(const Graph& g, const Case2State& st);

struct EmbedOutcome {
    std::optional<Embedding> embedding;
    TrialReport report;
};

/// End-to-end: dispatches on leaf count, runs the stages, assembles and
/// verifies the final embedding against host plus all phases.
EmbedOutcome embed_spanning_tree(const Tree& t, const Graph& host, const PerturbationPlan& plan,
                                 const PipelineConfig& cfg, std::uint64_t seed);

}  // namespace perturb
