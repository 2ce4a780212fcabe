#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perturb/graph.hpp"

namespace perturb {

struct RegularityParams {
    double epsilon = 0.25;
    double delta = 0.15;
    int witness_budget = 1000;  // sample count for randomized certification
};

enum class CertMode { exhaustive, sampled };

struct DensityWitness {
    std::vector<int> u1, u2;  // threshold-size subsets of x resp. y
    double density = 0.0;
};

struct CertVerdict {
    bool pass = true;
    std::optional<DensityWitness> witness;  // present on FAIL
};

struct CertOptions {
    int budget = 1000;
    std::uint64_t seed = 0;
    bool parallel = true;  // sampled mode fans samples out over OpenMP threads
};

/// PASS iff no pair of subsets U1 <= x, U2 <= y with |U_h| >= eps|V_h| has
/// density below delta. Exhaustive mode is a decision procedure (|x|+|y| <= 24;
/// violations are monotone-hardest at the threshold size, so only threshold
/// subsets are scanned). Sampled mode is one-sided: FAIL verdicts always carry
/// a concrete counterexample, PASS means no witness found.
CertVerdict certify_dense(const Graph& g, const VertexSet& x, const VertexSet& y, double eps,
                          double delta, CertMode mode, const CertOptions& opts = {});

/// certify_dense plus the degree clause: every vertex of x has >= delta|y|
/// neighbours in y and vice versa.
CertVerdict certify_super_regular(const Graph& g, const VertexSet& x, const VertexSet& y,
                                  double eps, double delta, CertMode mode,
                                  const CertOptions& opts = {});

/// Recomputes a witness's density from the graph; true when it really
/// violates delta at the threshold sizes.
bool recheck_witness(const Graph& g, const VertexSet& x, const VertexSet& y, double eps,
                     double delta, const DensityWitness& w);

/// Spanning union of vertex-disjoint stars, each with 2..1+floor(1/alpha)
/// vertices; star[0] is the center. Exchange-argument construction; requires
/// min_degree(g) >= alpha*n.
std::vector<std::vector<int>> star_cover(const Graph& g, double alpha);

bool validate_star_cover(const Graph& g, double alpha, const std::vector<std::vector<int>>& stars);

/// Partition of V into pairs of partner clusters, each certified
/// (epsilon,delta)-super-regular.
struct ClusterPartition {
    std::vector<std::array<std::vector<int>, 2>> pairs;  // pairs[i][h] = V_(i+1,h+1)
    RegularityParams params;
    double rho = 1.0;                   // max cluster size ratio
    int q = 0;                          // pair count
    std::vector<double> pair_density;   // measured density per pair

    std::string to_json(const Graph& g) const;  // partition dump format
};

struct PartitionResult {
    std::optional<ClusterPartition> partition;
    std::string failed_step;  // empty on success
    int failed_pair = -1;
};

/// Surrogate partitioner: (1) neighbourhood-signature refinement of a random
/// equitable partition, (2) cluster graph on pairs that pass sampled density
/// certification at threshold alpha', (3) star cover of the cluster graph,
/// (4) leaf-cluster merge per star, (5) trim to a super-regular core,
/// (6) random redistribution of trimmed vertices. Output is re-certified from
/// scratch; any failing pair fails the build.
PartitionResult build_partition(const Graph& g, double alpha, int target_cluster_size,
                                const RegularityParams& params, std::uint64_t seed,
                                double alpha_prime = -1.0, bool parallel = true);

/// Draws uniformly random subsets of the given sizes from x and y and
/// certifies the sub-pair as super-regular at (eps_prime, delta/2).
CertVerdict subset_inherits(const Graph& g, const VertexSet& x, const VertexSet& y, int size_x,
                            int size_y, double eps_prime, double delta, int budget,
                            std::uint64_t seed);

// Parameter arithmetic for merged and perturbed pairs.
double combine_delta(double delta, int r);
double robust_eps(double eps, double f);
double robust_delta(double delta, double f, double eps);

}  // namespace perturb
