#include "trafficlab/cem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "trafficlab/rng.hpp"
#include "trafficlab/util.hpp"

namespace traffic::cem {

namespace {

void parallel_evaluate(const FitnessFn& fitness,
                       const std::vector<Eigen::VectorXd>& candidates,
                       std::span<const std::uint64_t> seeds, int jobs,
                       std::vector<double>& out) {
    out.assign(candidates.size(), 0.0);
    const int workers =
        std::max(1, std::min<int>(jobs, static_cast<int>(candidates.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < candidates.size(); ++i)
            out[i] = fitness(candidates[i], seeds);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= candidates.size()) return;
            out[i] = fitness(candidates[i], seeds);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
}

}  // namespace

CemResult train_cem(const FitnessFn& fitness, int dim, const CemConfig& cfg,
                    const Eigen::VectorXd* init_mean) {
    if (cfg.population < 8) throw ConfigError("CEM population must be >= 8");
    if (dim < 1) throw ConfigError("CEM dimension must be positive");

    Eigen::VectorXd mean = init_mean != nullptr
                               ? *init_mean
                               : Eigen::VectorXd::Zero(dim);
    if (mean.size() != dim)
        throw ConfigError("CEM init mean has wrong dimension");
    Eigen::VectorXd stddev = Eigen::VectorXd::Constant(dim, cfg.init_std);

    RngStreams streams(cfg.seed);
    RandomStream sampler = streams.stream("cem_sample");
    RandomStream seeder = streams.stream("cem_episodes");

    CemResult res;
    res.best_fitness = -std::numeric_limits<double>::infinity();
    res.curve.reserve(static_cast<std::size_t>(cfg.iterations));

    std::vector<Eigen::VectorXd> pop(static_cast<std::size_t>(cfg.population));
    std::vector<double> fit;
    std::vector<std::uint64_t> episode_seeds(
        static_cast<std::size_t>(std::max(cfg.episodes_per_candidate, 1)));

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        // Candidates are sampled in (candidate, dim) order; episode seeds are
        // drawn once per iteration and shared across the population.
        for (auto& seed : episode_seeds) seed = seeder.next_u64();
        for (int c = 0; c < cfg.population; ++c) {
            Eigen::VectorXd x(dim);
            for (int d = 0; d < dim; ++d)
                x[d] = mean[d] + stddev[d] * sampler.normal();
            pop[static_cast<std::size_t>(c)] = std::move(x);
        }

        parallel_evaluate(fitness, pop, episode_seeds, cfg.jobs, fit);

        std::vector<int> order;
        order.reserve(pop.size());
        double fsum = 0.0;
        double fbest = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < cfg.population; ++c) {
            const double f = fit[static_cast<std::size_t>(c)];
            if (!std::isfinite(f)) {
                ++res.discarded;
                continue;
            }
            order.push_back(c);
            fsum += f;
            fbest = std::max(fbest, f);
            if (f > res.best_fitness) {
                res.best_fitness = f;
                res.best_params = pop[static_cast<std::size_t>(c)];
            }
        }
        if (order.empty())
            throw std::runtime_error("CEM: every candidate had non-finite fitness");

        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return fit[static_cast<std::size_t>(a)] >
                   fit[static_cast<std::size_t>(b)];
        });
        const int k =
            std::min<int>(cfg.elite_count(), static_cast<int>(order.size()));

        Eigen::VectorXd new_mean = Eigen::VectorXd::Zero(dim);
        for (int e = 0; e < k; ++e)
            new_mean += pop[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])];
        new_mean /= static_cast<double>(k);

        Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
        for (int e = 0; e < k; ++e) {
            const Eigen::VectorXd d =
                pop[static_cast<std::size_t>(order[static_cast<std::size_t>(e)])] - new_mean;
            var += d.cwiseProduct(d);
        }
        var /= static_cast<double>(k);
        mean = std::move(new_mean);
        stddev = var.cwiseSqrt().cwiseMax(cfg.std_floor);

        const double mean_fit =
            cfg.track_elite_mean_fitness
                ? fitness(mean, episode_seeds)
                : std::numeric_limits<double>::quiet_NaN();
        res.curve.push_back({iter, fsum / static_cast<double>(order.size()),
                             fbest, stddev.mean(), mean_fit});
    }

    res.mean = std::move(mean);
    res.stddev = std::move(stddev);
    return res;
}

}  // namespace traffic::cem
