#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "villani/net_loss.hpp"

namespace villani {

struct InitSpec {
    enum class Kind { GaussianStd, GaussianScaled, Fixed };
    Kind kind = Kind::GaussianStd;
    double sigma_w = 1.0;
    MatrixXd fixed;  ///< used by Kind::Fixed only

    static InitSpec standard() { return {}; }
    /// Throws InvalidArgument unless sigma_w > 0.
    static InitSpec scaled(double sigma_w);
    /// Point-mass start at W.
    static InitSpec at(MatrixXd w);
};

/// p x d matrix of i.i.d. N(0, sigma_w^2) entries, deterministic in `seed`
/// (or the fixed matrix for Kind::Fixed).
MatrixXd init_weights(const InitSpec& init, Index p, Index d, std::uint64_t seed);

struct SgdConfig {
    double step_s = 0.1;
    Index batch_b = 1;
    std::int64_t num_steps = 1;
    std::uint64_t seed = 0;
    InitSpec init;
    std::int64_t record_every = 1;

    /// epochs * ceil(n / b)
    static std::int64_t steps_for_epochs(std::int64_t epochs, Index n, Index b);
};

struct TrajectoryRecord {
    std::int64_t step = 0;
    double time = 0.0;  ///< step * s
    double risk = 0.0;
    double grad_norm = 0.0;
    double w_fro = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRecord> records;
    NetState final_state;
    std::vector<std::string> warnings;
};

/// Risk above which a run is treated as diverged.
inline constexpr double kDivergenceRisk = 1e12;

/// W <- (1 - s lambda) W - (s/b) sum_{i in batch} grad l(y_i f_i).
NetState sgd_step(const LossSpec& spec, const NetState& net, double step_s,
                  std::span<const Index> batch);

/// Constant-step minibatch SGD from the given starting net. Batches are drawn
/// without replacement within each epoch and reshuffled every epoch.
Trajectory run_sgd(const LossSpec& spec, const NetState& start, const SgdConfig& cfg);

/// Same, with W_0 drawn from cfg.init.
Trajectory run_sgd(const LossSpec& spec, const VectorXd& outer, const SgdConfig& cfg);

/// m independent runs; member k uses seed derive_seed(cfg.seed, k). Results are in member order.
std::vector<Trajectory> run_sgd_ensemble(const LossSpec& spec, const VectorXd& outer,
                                         const SgdConfig& cfg, int members, unsigned threads = 0);

/// Mean over the ensemble of (risk - global_min) at each recorded step, as (time, excess).
std::vector<std::pair<double, double>> excess_risk_curve(std::span<const Trajectory> ensemble,
                                                         double global_min);

/// CSV with header step,time,risk,grad_norm,w_fro.
std::string trajectory_csv(const Trajectory& traj);

}  // namespace villani
