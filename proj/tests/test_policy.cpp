#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "trafficlab/policy.hpp"
#include "trafficlab/rng.hpp"
#include "trafficlab/util.hpp"

using namespace traffic;

namespace {

// Plain-loop reference forward pass, independent of the Eigen-map layout
// code in the implementation.
std::vector<double> reference_mlp(const std::vector<double>& obs,
                                  const std::vector<int>& sizes,
                                  const std::vector<double>& params,
                                  bool saturate_first = false) {
    std::vector<double> x = obs;
    std::size_t p = 0;
    for (std::size_t layer = 0; layer + 1 < sizes.size(); ++layer) {
        const int in = sizes[layer], out = sizes[layer + 1];
        std::vector<double> y(static_cast<std::size_t>(out), 0.0);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c)
                y[static_cast<std::size_t>(r)] +=
                    params[p + static_cast<std::size_t>(r * in + c)] *
                    x[static_cast<std::size_t>(c)];
        p += static_cast<std::size_t>(out * in);
        for (int r = 0; r < out; ++r)
            y[static_cast<std::size_t>(r)] += params[p + static_cast<std::size_t>(r)];
        p += static_cast<std::size_t>(out);
        const bool last = layer + 2 == sizes.size();
        if (!last) {
            for (auto& v : y)
                v = (saturate_first && layer == 0) ? (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0))
                                                   : std::tanh(v);
        }
        x = std::move(y);
    }
    return x;
}

Eigen::VectorXd random_vec(int n, RandomStream& rng, double scale) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * rng.normal();
    return v;
}

double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("the partial-observation MLP has exactly 29 parameters") {
    CHECK(policy::param_count(policy::MlpSpec{3, {3, 3}, 1}) == 29);
    CHECK(policy::param_count(policy::MlpSpec{44, {8, 8}, 11}) ==
          44 * 8 + 8 + 8 * 8 + 8 + 8 * 11 + 11 + 1);
}

TEST_CASE("all-zero weights produce zero output") {
    policy::MlpPolicy mlp(policy::MlpSpec{3, {3, 3}, 1},
                          Eigen::VectorXd::Zero(29));
    RandomStream rng(1);
    for (int i = 0; i < 50; ++i) {
        Eigen::VectorXd obs = random_vec(3, rng, 10.0);
        CHECK(mlp.forward(obs)[0] == 0.0);
    }
}

TEST_CASE("MLP forward matches an independent reference implementation") {
    RandomStream rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const Eigen::VectorXd params = random_vec(29, rng, 0.7);
        policy::MlpPolicy mlp(policy::MlpSpec{3, {3, 3}, 1}, params);
        const Eigen::VectorXd obs = random_vec(3, rng, 3.0);
        const std::vector<double> ref = reference_mlp(
            {obs[0], obs[1], obs[2]}, {3, 3, 3, 1},
            std::vector<double>(params.data(), params.data() + 29));
        CHECK(mlp.forward(obs)[0] == doctest::Approx(ref[0]).epsilon(1e-12));
    }
}

TEST_CASE("scaling observations saturates the first hidden layer") {
    RandomStream rng(3);
    const Eigen::VectorXd params = random_vec(29, rng, 0.7);
    policy::MlpPolicy mlp(policy::MlpSpec{3, {3, 3}, 1}, params);
    const Eigen::VectorXd obs = random_vec(3, rng, 2.0);
    const Eigen::VectorXd big = obs * 1e6;
    const std::vector<double> ref = reference_mlp(
        {big[0], big[1], big[2]}, {3, 3, 3, 1},
        std::vector<double>(params.data(), params.data() + 29),
        /*saturate_first=*/true);
    CHECK(mlp.forward(big)[0] == doctest::Approx(ref[0]).epsilon(1e-9));
}

TEST_CASE("MLP rejects mismatched observation sizes") {
    policy::MlpPolicy mlp(policy::MlpSpec{3, {3, 3}, 1},
                          Eigen::VectorXd::Zero(29));
    CHECK_THROWS_AS(mlp.forward(Eigen::VectorXd::Zero(4)), ConfigError);
    CHECK_THROWS_AS(policy::MlpPolicy(policy::MlpSpec{3, {3, 3}, 1},
                                      Eigen::VectorXd::Zero(28)),
                    ConfigError);
}

TEST_CASE("the ring GRU has exactly 142 parameters") {
    CHECK(policy::param_count(policy::GruSpec{3, 5, 1}) == 142);
}

TEST_CASE("zero-weight GRU outputs zero and keeps a zero hidden state") {
    policy::GruPolicy gru(policy::GruSpec{3, 5, 1},
                          Eigen::VectorXd::Zero(142));
    Eigen::VectorXd obs(3);
    obs << 1.0, -2.0, 3.0;
    for (int k = 0; k < 10; ++k) {
        CHECK(gru.step(obs)[0] == 0.0);
        CHECK(gru.hidden_state().norm() == 0.0);
    }
}

TEST_CASE("GRU single step matches a hand-rolled gate computation") {
    RandomStream rng(4);
    const policy::GruSpec spec{3, 5, 1};
    const Eigen::VectorXd params = random_vec(policy::param_count(spec), rng, 0.6);
    const Eigen::VectorXd obs = random_vec(3, rng, 1.5);
    const Eigen::VectorXd h0 = random_vec(5, rng, 0.5);

    // parameter layout: [Wz, Uz, bz, Wr, Ur, br, Wn, Un, bn, Wo, bo, log_std]
    // with row-major H-by-I and H-by-H blocks
    auto at = [&](std::size_t off, int i, int cols, int j) {
        return params[static_cast<Eigen::Index>(off) +
                      static_cast<Eigen::Index>(i * cols + j)];
    };
    const std::size_t HI = 15, HH = 25, B = 5, gate = HI + HH + B;
    std::vector<double> z(5), r(5), n(5), h1(5);
    for (int i = 0; i < 5; ++i) {
        double az = 0.0, ar = 0.0;
        for (int j = 0; j < 3; ++j) az += at(0, i, 3, j) * obs[j];
        for (int j = 0; j < 5; ++j) az += at(HI, i, 5, j) * h0[j];
        az += at(HI + HH, 0, 1, i);
        z[static_cast<std::size_t>(i)] = sigmoid_ref(az);
        for (int j = 0; j < 3; ++j) ar += at(gate, i, 3, j) * obs[j];
        for (int j = 0; j < 5; ++j) ar += at(gate + HI, i, 5, j) * h0[j];
        ar += at(gate + HI + HH, 0, 1, i);
        r[static_cast<std::size_t>(i)] = sigmoid_ref(ar);
    }
    for (int i = 0; i < 5; ++i) {
        double an = 0.0, uh = 0.0;
        for (int j = 0; j < 3; ++j) an += at(2 * gate, i, 3, j) * obs[j];
        for (int j = 0; j < 5; ++j) uh += at(2 * gate + HI, i, 5, j) * h0[j];
        an += r[static_cast<std::size_t>(i)] * uh;
        an += at(2 * gate + HI + HH, 0, 1, i);
        n[static_cast<std::size_t>(i)] = std::tanh(an);
    }
    for (int i = 0; i < 5; ++i)
        h1[static_cast<std::size_t>(i)] =
            (1.0 - z[static_cast<std::size_t>(i)]) *
                n[static_cast<std::size_t>(i)] +
            z[static_cast<std::size_t>(i)] * h0[i];
    double out = at(3 * gate + 5, 0, 1, 0);  // output bias
    for (int j = 0; j < 5; ++j)
        out += at(3 * gate, 0, 5, j) * h1[static_cast<std::size_t>(j)];

    const auto [got, h_new] = policy::GruPolicy::forward(obs, h0, spec, params);
    CHECK(got[0] == doctest::Approx(out).epsilon(1e-12));
    for (int i = 0; i < 5; ++i)
        CHECK(h_new[i] == doctest::Approx(h1[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("GRU hidden state converges under constant observations") {
    RandomStream rng(5);
    const policy::GruSpec spec{3, 5, 1};
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd params =
            random_vec(policy::param_count(spec), rng, 0.3);
        policy::GruPolicy gru(spec, params);
        Eigen::VectorXd obs(3);
        obs << 0.5, -0.2, 1.0;
        Eigen::VectorXd prev = gru.hidden_state();
        double delta = 1.0;
        for (int k = 0; k < 1000; ++k) {
            gru.step(obs);
            delta = (gru.hidden_state() - prev).norm();
            prev = gru.hidden_state();
        }
        CHECK(delta < 1e-10);
    }
}

TEST_CASE("GRU state resets between episodes") {
    RandomStream rng(6);
    const policy::GruSpec spec{3, 5, 1};
    const Eigen::VectorXd params = random_vec(policy::param_count(spec), rng, 0.5);
    policy::GruPolicy gru(spec, params);
    Eigen::VectorXd obs(3);
    obs << 1.0, 1.0, 1.0;
    const double first = gru.step(obs)[0];
    gru.step(obs);
    gru.reset_state();
    CHECK(gru.hidden_state().norm() == 0.0);
    CHECK(gru.step(obs)[0] == doctest::Approx(first));
}

TEST_CASE("policy files round-trip bit-exactly") {
    RandomStream rng(7);
    policy::PolicyFile f;
    f.arch = "mlp";
    f.input = 3;
    f.hidden = {3, 3};
    f.output = 1;
    f.params = random_vec(29, rng, 1.3);
    f.tool_version = "test";
    f.config_digest = "deadbeef";
    f.seed = 17;
    const auto path =
        (std::filesystem::temp_directory_path() / "tl_policy.json").string();
    policy::save_policy(f, path);
    const auto g = policy::load_policy(path);
    CHECK(g.arch == "mlp");
    CHECK(g.hidden == std::vector<int>{3, 3});
    CHECK(g.seed == 17);
    REQUIRE(g.params.size() == f.params.size());
    for (Eigen::Index i = 0; i < f.params.size(); ++i)
        CHECK(g.params[i] == f.params[i]);
    CHECK_THROWS_AS(policy::load_policy("/nonexistent/policy.json"),
                    ConfigError);
}
