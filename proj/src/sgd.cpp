#include "villani/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "villani/bounds.hpp"
#include "villani/error.hpp"
#include "villani/io.hpp"
#include "villani/parallel.hpp"
#include "villani/rng.hpp"

namespace villani {

namespace {

TrajectoryRecord make_record(const LossSpec& spec, const NetState& net, std::int64_t step,
                             double step_s) {
    TrajectoryRecord rec;
    rec.step = step;
    rec.time = static_cast<double>(step) * step_s;
    rec.risk = risk(spec, net);
    rec.grad_norm = full_grad(spec, net).norm();
    rec.w_fro = net.inner.norm();
    if (!std::isfinite(rec.risk) || rec.risk > kDivergenceRisk) {
        throw Divergence("SGD diverged at step " + std::to_string(step) +
                         " (risk = " + format_number(rec.risk) + ")");
    }
    return rec;
}

}  // namespace

InitSpec InitSpec::scaled(double sigma_w) {
    if (!(sigma_w > 0.0) || !std::isfinite(sigma_w)) {
        throw InvalidArgument("init scale sigma_w must be > 0");
    }
    InitSpec init;
    init.kind = Kind::GaussianScaled;
    init.sigma_w = sigma_w;
    return init;
}

InitSpec InitSpec::at(MatrixXd w) {
    InitSpec init;
    init.kind = Kind::Fixed;
    init.fixed = std::move(w);
    return init;
}

MatrixXd init_weights(const InitSpec& init, Index p, Index d, std::uint64_t seed) {
    if (p < 1 || d < 1) {
        throw InvalidArgument("init_weights: p and d must be >= 1");
    }
    if (init.kind == InitSpec::Kind::Fixed) {
        if (init.fixed.rows() != p || init.fixed.cols() != d) {
            throw DimensionMismatch("init_weights: fixed start has the wrong shape");
        }
        return init.fixed;
    }
    const double scale = init.kind == InitSpec::Kind::GaussianStd ? 1.0 : init.sigma_w;
    if (!(scale > 0.0)) {
        throw InvalidArgument("init scale sigma_w must be > 0");
    }
    Rng rng(seed);
    MatrixXd w(p, d);
    fill_normal(w, rng);
    return scale * w;
}

std::int64_t SgdConfig::steps_for_epochs(std::int64_t epochs, Index n, Index b) {
    if (b < 1 || n < 1) {
        throw InvalidArgument("steps_for_epochs: n and b must be >= 1");
    }
    return epochs * static_cast<std::int64_t>((n + b - 1) / b);
}

NetState sgd_step(const LossSpec& spec, const NetState& net, double step_s,
                  std::span<const Index> batch) {
    if (!(step_s >= 0.0) || !std::isfinite(step_s)) {
        throw InvalidArgument("sgd_step: step size must be finite and >= 0");
    }
    const MatrixXd g = batch_logistic_grad(spec, net, batch);
    NetState next = net;
    next.inner = (1.0 - step_s * spec.lambda) * net.inner - step_s * g;
    if (!next.inner.allFinite()) {
        throw Divergence("SGD produced a non-finite iterate");
    }
    return next;
}

Trajectory run_sgd(const LossSpec& spec, const NetState& start, const SgdConfig& cfg) {
    const Index n = spec.data.size();
    if (!(cfg.step_s > 0.0) || !std::isfinite(cfg.step_s)) {
        throw InvalidArgument("run_sgd: step size must be finite and > 0");
    }
    if (cfg.batch_b < 1 || cfg.batch_b > n) {
        throw InvalidArgument("run_sgd: batch size must be in [1, n]");
    }
    if (cfg.num_steps < 0 || cfg.record_every < 1) {
        throw InvalidArgument("run_sgd: num_steps must be >= 0 and record_every >= 1");
    }
    if (start.dim() != spec.data.dim()) {
        throw DimensionMismatch("run_sgd: net and data dimensions differ");
    }

    Trajectory traj;
    if (spec.activation.bounded()) {
        const double cap = 1.0 / glip_bound(BoundInputs::from(spec, start));
        if (cfg.step_s > cap) {
            traj.warnings.push_back("step size " + format_number(cfg.step_s) +
                                    " exceeds 1/gLip bound " + format_number(cap));
        }
    }

    Rng rng(derive_seed(cfg.seed, 1));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::size_t cursor = order.size();

    NetState net = start;
    traj.records.push_back(make_record(spec, net, 0, cfg.step_s));
    for (std::int64_t k = 1; k <= cfg.num_steps; ++k) {
        if (cursor >= order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const std::size_t len =
            std::min(static_cast<std::size_t>(cfg.batch_b), order.size() - cursor);
        net = sgd_step(spec, net, cfg.step_s, std::span<const Index>(order).subspan(cursor, len));
        cursor += len;
        if (k % cfg.record_every == 0 || k == cfg.num_steps) {
            traj.records.push_back(make_record(spec, net, k, cfg.step_s));
        }
    }
    traj.final_state = std::move(net);
    return traj;
}

Trajectory run_sgd(const LossSpec& spec, const VectorXd& outer, const SgdConfig& cfg) {
    MatrixXd w0 = init_weights(cfg.init, outer.size(), spec.data.dim(), derive_seed(cfg.seed, 0));
    return run_sgd(spec, NetState::create(outer, std::move(w0)), cfg);
}

std::vector<Trajectory> run_sgd_ensemble(const LossSpec& spec, const VectorXd& outer,
                                         const SgdConfig& cfg, int members, unsigned threads) {
    if (members < 1) {
        throw InvalidArgument("run_sgd_ensemble: need at least one member");
    }
    std::vector<Trajectory> out(static_cast<std::size_t>(members));
    parallel_for(out.size(), threads, [&](std::size_t k) {
        SgdConfig member = cfg;
        member.seed = derive_seed(cfg.seed, k);
        out[k] = run_sgd(spec, outer, member);
    });
    return out;
}

std::vector<std::pair<double, double>> excess_risk_curve(std::span<const Trajectory> ensemble,
                                                         double global_min) {
    if (ensemble.empty()) {
        throw InvalidArgument("excess_risk_curve: empty ensemble");
    }
    const std::size_t len = ensemble.front().records.size();
    for (const auto& t : ensemble) {
        if (t.records.size() != len) {
            throw InvalidArgument("excess_risk_curve: trajectories have different record counts");
        }
    }
    std::vector<std::pair<double, double>> curve(len);
    const double m = static_cast<double>(ensemble.size());
    for (std::size_t r = 0; r < len; ++r) {
        double sum = 0.0;
        for (const auto& t : ensemble) {
            sum += t.records[r].risk - global_min;
        }
        curve[r] = {ensemble.front().records[r].time, sum / m};
    }
    return curve;
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream os;
    os << "step,time,risk,grad_norm,w_fro\n";
    for (const auto& r : traj.records) {
        os << r.step << ',' << format_number(r.time) << ',' << format_number(r.risk) << ','
           << format_number(r.grad_norm) << ',' << format_number(r.w_fro) << '\n';
    }
    return os.str();
}

}  // namespace villani
