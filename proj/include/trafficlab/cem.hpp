#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace traffic::cem {

/// Cross-entropy method over a diagonal Gaussian in parameter space.
struct CemConfig {
    int population = 64;
    double elite_frac = 0.125;
    int iterations = 150;
    double init_std = 0.5;
    double std_floor = 0.02;
    int episodes_per_candidate = 2;
    double gamma = 1.0;  // fitness discount; 1 = plain post-warmup sum
    std::uint64_t seed = 0;
    int jobs = 1;
    // Also score the refit mean each iteration (one extra fitness call);
    // used by the monotonicity property tests.
    bool track_elite_mean_fitness = false;

    int elite_count() const {
        const int k = static_cast<int>(population * elite_frac + 0.5);
        return k < 2 ? 2 : k;
    }
};

struct IterationStats {
    int iteration;
    double fitness_mean;  // over finite candidates this iteration
    double fitness_best;  // best candidate this iteration
    double param_std_mean;
    double elite_mean_fitness;  // NaN unless track_elite_mean_fitness
};

struct CemResult {
    Eigen::VectorXd best_params;  // best candidate ever evaluated
    double best_fitness = 0.0;
    Eigen::VectorXd mean;  // final distribution mean
    Eigen::VectorXd stddev;
    std::vector<IterationStats> curve;
    int discarded = 0;  // candidates with non-finite fitness
};

/// Candidate fitness. The same episode seeds are shared by every candidate
/// within an iteration (common random numbers), so comparisons are fair.
/// Must be thread-safe; non-finite results discard the candidate.
using FitnessFn =
    std::function<double(const Eigen::VectorXd&, std::span<const std::uint64_t>)>;

/// Iterates: sample population, evaluate (in parallel across `jobs`
/// threads), refit mean/std to the elites with the std floored. Fully
/// reproducible from (config, init_mean); thread count does not change the
/// result.
CemResult train_cem(const FitnessFn& fitness, int dim, const CemConfig& cfg,
                    const Eigen::VectorXd* init_mean = nullptr);

}  // namespace traffic::cem
