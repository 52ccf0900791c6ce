#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace traffic::policy {

/// Feedforward control law: tanh hidden layers, linear output, plus one
/// global log-std used only for exploration sampling. Parameters live in one
/// flat vector laid out [W1 row-major, b1, W2, b2, ..., Wout, bout, log_std].
struct MlpSpec {
    int input = 3;
    std::vector<int> hidden{3, 3};
    int output = 1;
};

int param_count(const MlpSpec& spec);

class MlpPolicy {
public:
    MlpPolicy(MlpSpec spec, Eigen::VectorXd params);

    /// Deterministic mean action(s) for one observation.
    Eigen::VectorXd forward(const Eigen::VectorXd& obs) const;

    double log_std() const { return params_[params_.size() - 1]; }
    const Eigen::VectorXd& params() const { return params_; }
    const MlpSpec& spec() const { return spec_; }

private:
    MlpSpec spec_;
    Eigen::VectorXd params_;
};

/// Single gated-recurrent layer with a linear output head. Hidden state is
/// carried across steps within one episode and reset at episode start.
/// Layout: [Wz, Uz, bz, Wr, Ur, br, Wn, Un, bn, Wout, bout, log_std].
struct GruSpec {
    int input = 3;
    int hidden = 5;
    int output = 1;
};

int param_count(const GruSpec& spec);

class GruPolicy {
public:
    GruPolicy(GruSpec spec, Eigen::VectorXd params);

    void reset_state();

    /// Advances the hidden state and returns the mean action(s).
    Eigen::VectorXd step(const Eigen::VectorXd& obs);

    /// Pure single-step update used by step(); exposed for testing.
    static std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(
        const Eigen::VectorXd& obs, const Eigen::VectorXd& hidden,
        const GruSpec& spec, const Eigen::VectorXd& params);

    const Eigen::VectorXd& hidden_state() const { return hidden_; }
    double log_std() const { return params_[params_.size() - 1]; }
    const Eigen::VectorXd& params() const { return params_; }
    const GruSpec& spec() const { return spec_; }

private:
    GruSpec spec_;
    Eigen::VectorXd params_;
    Eigen::VectorXd hidden_;
};

/// Serialized policy: architecture header plus the flat parameter array.
/// tool_version/config_digest/seed record where the parameters came from.
struct PolicyFile {
    int format_version = 1;
    std::string arch;  // "mlp" | "gru"
    int input = 3;
    std::vector<int> hidden{3, 3};
    int output = 1;
    std::string activation = "tanh";
    std::string observation_mode = "partial";  // "partial" | "full"
    bool normalize_observations = false;
    std::string tool_version;
    std::string config_digest;
    std::uint64_t seed = 0;
    Eigen::VectorXd params;
};

void save_policy(const PolicyFile& file, const std::string& path);
PolicyFile load_policy(const std::string& path);

}  // namespace traffic::policy
