#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "villani/net_loss.hpp"
#include "villani/sgd.hpp"

namespace villani {

/// Euler-Maruyama integration of dW = -grad L(W) dt + sqrt(temp_s) dB.
struct SdeConfig {
    double temp_s = 1e-2;
    double dt = 1e-3;
    double horizon_T = 1.0;
    int ensemble_m = 1;
    std::uint64_t seed = 0;
    InitSpec init;
    std::int64_t record_every = 1;  ///< in integrator steps
    unsigned threads = 0;           ///< 0 = hardware concurrency
};

/// min(1e-3, 0.1 / gLip) for bounded activations, 1e-3 otherwise.
double default_dt(const LossSpec& spec, const NetState& net);

/// W <- W - dt grad L(W) + sqrt(temp_s dt) noise
NetState em_step(const LossSpec& spec, const NetState& net, double temp_s, double dt,
                 const MatrixXd& noise);

struct SeriesPoint {
    double t = 0.0;
    double mean_risk = 0.0;
    double stderr_risk = 0.0;
    int m = 0;
};

struct EnsembleResult {
    std::vector<SeriesPoint> series;
    std::vector<MatrixXd> final_inner;  ///< terminal W of each member, in member order
    std::vector<std::string> warnings;
};

/// m independent trajectories; member k draws W_0 from cfg.init with derive_seed(seed, 2k)
/// and its Brownian increments from derive_seed(seed, 2k + 1).
EnsembleResult run_ensemble(const LossSpec& spec, const VectorXd& outer, const SdeConfig& cfg);

struct RateFit {
    double lambda_hat = 0.0;
    double r2 = 0.0;
    double plateau = 0.0;
    std::size_t window_begin = 0;
    std::size_t window_end = 0;  ///< exclusive
};

struct RateFitOptions {
    /// Window starts at the first point whose excess is below upper * initial excess.
    double upper_fraction = 1.0;
    /// Window ends before the first point whose excess drops below lower * initial excess.
    double lower_fraction = 0.1;
    std::size_t min_points = 10;
};

/// Least-squares fit of log(mean_risk - plateau) against t over the pre-plateau
/// window. Without an explicit plateau the mean of the last 10% of the series is used.
RateFit fit_rate(const std::vector<SeriesPoint>& series, std::optional<double> plateau = std::nullopt,
                 const RateFitOptions& opts = {});

/// CSV with header t,mean_risk,stderr,m.
std::string series_csv(const std::vector<SeriesPoint>& series);

}  // namespace villani
