#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "trafficlab/cem.hpp"
#include "trafficlab/util.hpp"

using namespace traffic;

namespace {

double bowl(const Eigen::VectorXd& x, std::span<const std::uint64_t>) {
    return -x.squaredNorm();
}

}  // namespace

TEST_CASE("CEM contracts onto the optimum of a convex bowl") {
    cem::CemConfig cfg;
    cfg.population = 32;
    cfg.iterations = 50;
    cfg.init_std = 1.0;
    cfg.seed = 9;
    const auto res = cem::train_cem(bowl, 5, cfg);
    CHECK(res.mean.norm() < 0.1);
    CHECK(res.best_fitness > -0.05);
    CHECK(res.curve.size() == 50);
}

TEST_CASE("one golden iteration, frozen from the first run") {
    cem::CemConfig cfg;
    cfg.population = 8;
    cfg.elite_frac = 0.25;  // two elites
    cfg.iterations = 1;
    cfg.init_std = 1.0;
    cfg.episodes_per_candidate = 1;
    cfg.seed = 123;
    CHECK(cfg.elite_count() == 2);
    const auto res = cem::train_cem(bowl, 3, cfg);
    CHECK(res.best_fitness ==
          doctest::Approx(-0.30111413823139299).epsilon(1e-12));
    CHECK(res.mean[0] == doctest::Approx(0.14685649427590095).epsilon(1e-12));
    CHECK(res.mean[1] == doctest::Approx(-0.22246672181319099).epsilon(1e-12));
    CHECK(res.mean[2] == doctest::Approx(-0.463862971050368).epsilon(1e-12));
    CHECK(res.stddev[0] == doctest::Approx(0.22562272546076087).epsilon(1e-12));
    CHECK(res.stddev[1] == doctest::Approx(0.52713019094282521).epsilon(1e-12));
    CHECK(res.stddev[2] == doctest::Approx(0.20013292029077609).epsilon(1e-12));
}

TEST_CASE("the sampling std never falls below the floor") {
    cem::CemConfig cfg;
    cfg.population = 16;
    cfg.iterations = 40;
    cfg.std_floor = 0.02;
    cfg.seed = 4;
    const auto res = cem::train_cem(bowl, 4, cfg);
    CHECK(res.stddev.minCoeff() >= cfg.std_floor);
    for (const auto& row : res.curve)
        CHECK(row.param_std_mean >= cfg.std_floor);
}

TEST_CASE("training is deterministic and thread-count independent") {
    cem::CemConfig a;
    a.population = 16;
    a.iterations = 10;
    a.seed = 77;
    a.jobs = 1;
    cem::CemConfig b = a;
    b.jobs = 4;
    const auto ra = cem::train_cem(bowl, 6, a);
    const auto rb = cem::train_cem(bowl, 6, b);
    CHECK(ra.best_fitness == rb.best_fitness);
    CHECK((ra.mean - rb.mean).norm() == 0.0);
    CHECK((ra.best_params - rb.best_params).norm() == 0.0);
}

TEST_CASE("non-finite fitness discards the candidate") {
    int calls = 0;
    auto spiky = [&calls](const Eigen::VectorXd& x,
                          std::span<const std::uint64_t>) {
        ++calls;
        if (calls % 5 == 0) return std::numeric_limits<double>::quiet_NaN();
        return -x.squaredNorm();
    };
    cem::CemConfig cfg;
    cfg.population = 10;
    cfg.iterations = 3;
    cfg.seed = 5;
    cfg.jobs = 1;
    const auto res = cem::train_cem(spiky, 3, cfg);
    CHECK(res.discarded == 6);  // every fifth of 30 evaluations
    CHECK(std::isfinite(res.best_fitness));
}

TEST_CASE("elite-mean fitness is stochastically nondecreasing on the bowl") {
    // Start away from the optimum; once converged only std-floor jitter
    // remains, so decreases smaller than that scale do not count.
    const Eigen::VectorXd start = Eigen::VectorXd::Constant(6, 2.0);
    const double jitter = 4.0 * 6 * 0.02 * 0.02;
    int up = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cem::CemConfig cfg;
        cfg.population = 24;
        cfg.iterations = 30;
        cfg.init_std = 1.0;
        cfg.seed = seed;
        cfg.track_elite_mean_fitness = true;
        const auto res = cem::train_cem(bowl, 6, cfg, &start);
        CHECK(res.curve.back().elite_mean_fitness >
              -start.squaredNorm() + 1.0);  // it moved toward the optimum
        for (std::size_t k = 1; k < res.curve.size(); ++k) {
            ++total;
            if (res.curve[k].elite_mean_fitness >=
                res.curve[k - 1].elite_mean_fitness - jitter)
                ++up;
        }
    }
    CHECK(static_cast<double>(up) / total >= 0.9);
}

TEST_CASE("config validation") {
    cem::CemConfig cfg;
    cfg.population = 4;  // below the minimum of 8
    CHECK_THROWS_AS(cem::train_cem(bowl, 3, cfg), ConfigError);
    cem::CemConfig ok;
    CHECK_THROWS_AS(cem::train_cem(bowl, 0, ok), ConfigError);
}
