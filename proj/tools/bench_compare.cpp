// Compares the serial reference against the OpenMP-parallel paths: sampled
// density certification and the Monte Carlo trial loop. Verdicts and CSV
// output must match bit-for-bit; only the wall time may differ.

#include <chrono>
#include <cstdio>
#include <iostream>

#include "perturb/harness.hpp"
#include "perturb/regularity.hpp"
#include "perturb/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP disabled; both columns run serially\n");
#endif

    // sampled certification on a dense random pair
    {
        perturb::Graph g = perturb::generate_gnp(600, 0.5, 7);
        std::vector<int> a, b;
        for (int v = 0; v < 300; ++v) a.push_back(v);
        for (int v = 300; v < 600; ++v) b.push_back(v);
        perturb::VertexSet x(a), y(b);
        perturb::CertOptions serial{20000, 42, false};
        perturb::CertOptions parallel{20000, 42, true};

        auto t0 = Clock::now();
        auto v1 = perturb::certify_dense(g, x, y, 0.25, 0.15, perturb::CertMode::sampled, serial);
        double serial_ms = ms_since(t0);
        t0 = Clock::now();
        auto v2 = perturb::certify_dense(g, x, y, 0.25, 0.15, perturb::CertMode::sampled, parallel);
        double parallel_ms = ms_since(t0);
        std::printf("certify_dense (budget 20000): serial %.1f ms, parallel %.1f ms, speedup %.2fx, verdicts %s\n",
                    serial_ms, parallel_ms, serial_ms / parallel_ms,
                    v1.pass == v2.pass ? "match" : "DIFFER");
    }

    // Monte Carlo batch
    {
        perturb::ExperimentConfig cfg;
        cfg.host_spec = "gnp:0.5";
        cfg.n_list = {200};
        cfg.alpha = 0.35;
        cfg.tree_spec = "caterpillar";
        cfg.lambda = 0.15;
        cfg.c_grid = {30.0};
        cfg.trials = 20;
        cfg.seed = 99;
        cfg.timing_in_csv = false;

        cfg.threads = 1;
        auto t0 = Clock::now();
        auto serial = perturb::run_experiment(cfg);
        double serial_ms = ms_since(t0);

        cfg.threads = 0;
        t0 = Clock::now();
        auto parallel = perturb::run_experiment(cfg);
        double parallel_ms = ms_since(t0);

        std::printf("trial batch (20 trials, n=200): serial %.1f ms, parallel %.1f ms, speedup %.2fx, CSV %s\n",
                    serial_ms, parallel_ms, serial_ms / parallel_ms,
                    serial.csv == parallel.csv ? "identical" : "DIFFERS");
    }
    return 0;
}
