// Benchmark comparing the OpenMP-parallel kernels against their serial
// reference implementations on synthetic workloads.

#include <chrono>
#include <cstdio>
#include <vector>

#include "bisg/design.hpp"
#include "bisg/hiermodel.hpp"
#include "bisg/parallel.hpp"
#include "bisg/rng.hpp"

using namespace bisg;

namespace {

template <typename F>
double time_ms(F&& f, int reps) {
    // One warm-up call, then the best of `reps` timed calls.
    f();
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

volatile double sink;

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", max_threads());

    {
        Rng rng(1);
        std::vector<double> xs(4 << 20);
        for (auto& x : xs) x = rng.uniform() - 0.5;
        const double tp = time_ms(
            [&] { sink = chunked_sum(xs.size(), [&](std::size_t i) { return xs[i]; }); }, 5);
        const double ts = time_ms(
            [&] { sink = chunked_sum_serial(xs.size(), [&](std::size_t i) { return xs[i]; }); },
            5);
        std::printf("chunked_sum (%zu doubles):  parallel %.3f ms  serial %.3f ms  speedup %.2fx\n",
                    xs.size(), tp, ts, ts / tp);
    }

    {
        // Collapsed-posterior evaluation at a realistic training scale.
        Rng rng(2);
        const int G = 51, S = 20000;
        SurnameCountMatrix counts;
        counts.num_strata = G;
        for (int s = 0; s < S; ++s) {
            const int sid = counts.intern_surname("S" + std::to_string(s));
            for (int g = 0; g < G; ++g)
                if (rng.uniform() < 0.15)
                    counts.add(g, sid, 1 + static_cast<long long>(rng.uniform() * 20));
        }
        counts.finalize();
        Hyperparams hyper = Hyperparams::empirical_bayes(counts);
        Rng init_rng(3);
        const ModelState state = init_state(counts, hyper, init_rng);
        const double tp =
            time_ms([&] { sink = log_marginal_posterior(state, counts, hyper); }, 5);
        const double ts =
            time_ms([&] { sink = log_marginal_posterior_serial(state, counts, hyper); }, 5);
        std::printf("log_marginal_posterior (%d strata x %d surnames): parallel %.3f ms  "
                    "serial %.3f ms  speedup %.2fx\n",
                    G, counts.num_surnames(), tp, ts, ts / tp);
    }

    {
        Rng rng(4);
        std::vector<DesignCell> cells(500000);
        for (auto& c : cells) {
            c.count = 1 + static_cast<long long>(rng.uniform() * 50);
            c.p_est = rng.uniform() * 0.2;
            c.p_true = c.p_est;
        }
        const double tp = time_ms([&] { sink = success_rate(cells); }, 5);
        const double ts = time_ms([&] { sink = success_rate_serial(cells); }, 5);
        std::printf("success_rate (%zu cells):  parallel %.3f ms  serial %.3f ms  speedup %.2fx\n",
                    cells.size(), tp, ts, ts / tp);
    }
    return 0;
}
