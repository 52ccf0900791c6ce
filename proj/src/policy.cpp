#include "trafficlab/policy.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "trafficlab/util.hpp"

namespace traffic::policy {

namespace {

using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                              Eigen::Dynamic, Eigen::RowMajor>>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace

int param_count(const MlpSpec& spec) {
    int n = 0;
    int in = spec.input;
    for (int h : spec.hidden) {
        n += h * in + h;
        in = h;
    }
    n += spec.output * in + spec.output;
    return n + 1;  // global log-std
}

MlpPolicy::MlpPolicy(MlpSpec spec, Eigen::VectorXd params)
    : spec_(std::move(spec)), params_(std::move(params)) {
    if (params_.size() != param_count(spec_))
        throw ConfigError("MLP parameter vector has wrong length");
}

Eigen::VectorXd MlpPolicy::forward(const Eigen::VectorXd& obs) const {
    if (obs.size() != spec_.input)
        throw ConfigError("observation size does not match MLP input");
    Eigen::VectorXd x = obs;
    const double* p = params_.data();
    int in = spec_.input;
    for (int h : spec_.hidden) {
        MatMap W(p, h, in);
        p += h * in;
        VecMap b(p, h);
        p += h;
        x = (W * x + b).array().tanh().matrix();
        in = h;
    }
    MatMap W(p, spec_.output, in);
    p += spec_.output * in;
    VecMap b(p, spec_.output);
    return W * x + b;
}

int param_count(const GruSpec& spec) {
    const int gates = 3 * (spec.hidden * spec.input +
                           spec.hidden * spec.hidden + spec.hidden);
    return gates + spec.output * spec.hidden + spec.output + 1;
}

GruPolicy::GruPolicy(GruSpec spec, Eigen::VectorXd params)
    : spec_(spec), params_(std::move(params)),
      hidden_(Eigen::VectorXd::Zero(spec.hidden)) {
    if (params_.size() != param_count(spec_))
        throw ConfigError("GRU parameter vector has wrong length");
}

void GruPolicy::reset_state() { hidden_.setZero(); }

std::pair<Eigen::VectorXd, Eigen::VectorXd> GruPolicy::forward(
    const Eigen::VectorXd& obs, const Eigen::VectorXd& hidden,
    const GruSpec& spec, const Eigen::VectorXd& params) {
    if (obs.size() != spec.input)
        throw ConfigError("observation size does not match GRU input");
    if (hidden.size() != spec.hidden)
        throw ConfigError("hidden state size does not match GRU width");

    const int H = spec.hidden, I = spec.input;
    const double* p = params.data();
    auto take_mat = [&p](int rows, int cols) {
        MatMap m(p, rows, cols);
        p += rows * cols;
        return m;
    };
    auto take_vec = [&p](int n) {
        VecMap v(p, n);
        p += n;
        return v;
    };
    const MatMap Wz = take_mat(H, I), Uz = take_mat(H, H);
    const VecMap bz = take_vec(H);
    const MatMap Wr = take_mat(H, I), Ur = take_mat(H, H);
    const VecMap br = take_vec(H);
    const MatMap Wn = take_mat(H, I), Un = take_mat(H, H);
    const VecMap bn = take_vec(H);

    auto sigmoid = [](const Eigen::ArrayXd& a) {
        return (1.0 / (1.0 + (-a).exp())).matrix();
    };
    const Eigen::VectorXd z = sigmoid((Wz * obs + Uz * hidden + bz).array());
    const Eigen::VectorXd r = sigmoid((Wr * obs + Ur * hidden + br).array());
    const Eigen::VectorXd n =
        (Wn * obs + r.cwiseProduct(Un * hidden) + bn).array().tanh().matrix();
    const Eigen::VectorXd h_new =
        (Eigen::VectorXd::Ones(H) - z).cwiseProduct(n) + z.cwiseProduct(hidden);

    const MatMap Wo = take_mat(spec.output, H);
    const VecMap bo = take_vec(spec.output);
    return {Wo * h_new + bo, h_new};
}

Eigen::VectorXd GruPolicy::step(const Eigen::VectorXd& obs) {
    auto [out, h] = forward(obs, hidden_, spec_, params_);
    hidden_ = std::move(h);
    return out;
}

void save_policy(const PolicyFile& file, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = file.format_version;
    j["arch"] = file.arch;
    j["input"] = file.input;
    j["hidden"] = file.hidden;
    j["output"] = file.output;
    j["activation"] = file.activation;
    j["observation_mode"] = file.observation_mode;
    j["normalize_observations"] = file.normalize_observations;
    j["tool_version"] = file.tool_version;
    j["config_digest"] = file.config_digest;
    j["seed"] = file.seed;
    std::vector<double> flat(file.params.data(),
                             file.params.data() + file.params.size());
    j["params"] = flat;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << j.dump(2) << "\n";
}

PolicyFile load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open policy file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad policy file: ") + e.what());
    }
    PolicyFile f;
    try {
        f.format_version = j.at("format_version").get<int>();
        f.arch = j.at("arch").get<std::string>();
        f.input = j.at("input").get<int>();
        f.hidden = j.at("hidden").get<std::vector<int>>();
        f.output = j.at("output").get<int>();
        f.activation = j.at("activation").get<std::string>();
        f.observation_mode = j.at("observation_mode").get<std::string>();
        f.normalize_observations = j.at("normalize_observations").get<bool>();
        f.tool_version = j.value("tool_version", std::string{});
        f.config_digest = j.value("config_digest", std::string{});
        f.seed = j.value("seed", std::uint64_t{0});
        const auto flat = j.at("params").get<std::vector<double>>();
        f.params = Eigen::Map<const Eigen::VectorXd>(
            flat.data(), static_cast<Eigen::Index>(flat.size()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad policy file: ") + e.what());
    }
    if (f.format_version != 1)
        throw ConfigError("unsupported policy format_version");
    return f;
}

}  // namespace traffic::policy
