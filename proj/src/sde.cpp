#include "villani/sde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "villani/bounds.hpp"
#include "villani/error.hpp"
#include "villani/io.hpp"
#include "villani/parallel.hpp"
#include "villani/rng.hpp"

namespace villani {

namespace {

// Members are accumulated in fixed-size chunks and the chunk sums combined in
// chunk order, so the series does not depend on the thread count.
constexpr int kChunk = 64;

struct ChunkSums {
    std::vector<double> sum;
    std::vector<double> sumsq;
};

}  // namespace

double default_dt(const LossSpec& spec, const NetState& net) {
    if (spec.activation.bounded()) {
        return std::min(1e-3, 0.1 / glip_bound(BoundInputs::from(spec, net)));
    }
    return 1e-3;
}

NetState em_step(const LossSpec& spec, const NetState& net, double temp_s, double dt,
                 const MatrixXd& noise) {
    if (!(dt > 0.0)) {
        throw InvalidArgument("em_step: dt must be > 0");
    }
    if (!(temp_s >= 0.0)) {
        throw InvalidArgument("em_step: temperature must be >= 0");
    }
    if (noise.rows() != net.width() || noise.cols() != net.dim()) {
        throw DimensionMismatch("em_step: noise shape differs from W");
    }
    NetState next = net;
    next.inner -= dt * full_grad(spec, net);
    if (temp_s > 0.0) {
        next.inner += std::sqrt(temp_s * dt) * noise;
    }
    if (!next.inner.allFinite()) {
        throw Divergence("SDE integration produced a non-finite state");
    }
    return next;
}

EnsembleResult run_ensemble(const LossSpec& spec, const VectorXd& outer, const SdeConfig& cfg) {
    if (!(cfg.temp_s >= 0.0) || !(cfg.dt > 0.0) || !(cfg.horizon_T > 0.0) || cfg.dt > cfg.horizon_T) {
        throw InvalidArgument("run_ensemble: need temp_s >= 0 and 0 < dt <= horizon_T");
    }
    if (cfg.ensemble_m < 1 || cfg.record_every < 1) {
        throw InvalidArgument("run_ensemble: ensemble_m and record_every must be >= 1");
    }
    const Index p = outer.size();
    const Index d = spec.data.dim();
    const auto steps = static_cast<std::int64_t>(std::llround(cfg.horizon_T / cfg.dt));

    std::vector<std::int64_t> record_steps;
    for (std::int64_t k = 0; k <= steps; ++k) {
        if (k % cfg.record_every == 0 || k == steps) {
            record_steps.push_back(k);
        }
    }
    const std::size_t nrec = record_steps.size();

    EnsembleResult result;
    {
        const NetState probe = NetState::create(outer, MatrixXd::Zero(p, d));
        if (spec.activation.bounded()) {
            const double g = glip_bound(BoundInputs::from(spec, probe));
            if (cfg.dt * g > 1.0) {
                result.warnings.push_back("dt * gLip bound = " + format_number(cfg.dt * g) + " > 1");
            }
        }
    }

    const auto m = static_cast<std::size_t>(cfg.ensemble_m);
    const std::size_t nchunks = (m + kChunk - 1) / kChunk;
    std::vector<ChunkSums> chunks(nchunks);
    result.final_inner.resize(m);

    parallel_for(nchunks, cfg.threads, [&](std::size_t c) {
        ChunkSums& cs = chunks[c];
        cs.sum.assign(nrec, 0.0);
        cs.sumsq.assign(nrec, 0.0);
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(m, lo + kChunk);
        MatrixXd noise(p, d);
        for (std::size_t k = lo; k < hi; ++k) {
            MatrixXd w0 = init_weights(cfg.init, p, d, derive_seed(cfg.seed, 2 * k));
            NetState net = NetState::create(outer, std::move(w0));
            Rng rng(derive_seed(cfg.seed, 2 * k + 1));
            std::size_t r = 0;
            for (std::int64_t step = 0; step <= steps; ++step) {
                if (step > 0) {
                    fill_normal(noise, rng);
                    net = em_step(spec, net, cfg.temp_s, cfg.dt, noise);
                }
                if (r < nrec && record_steps[r] == step) {
                    const double v = risk(spec, net);
                    if (!std::isfinite(v)) {
                        throw Divergence("SDE risk became non-finite");
                    }
                    cs.sum[r] += v;
                    cs.sumsq[r] += v * v;
                    ++r;
                }
            }
            result.final_inner[k] = net.inner;
        }
    });

    result.series.resize(nrec);
    const double md = static_cast<double>(m);
    for (std::size_t r = 0; r < nrec; ++r) {
        double sum = 0.0;
        double sumsq = 0.0;
        for (const auto& cs : chunks) {
            sum += cs.sum[r];
            sumsq += cs.sumsq[r];
        }
        const double mean = sum / md;
        double se = 0.0;
        if (m > 1) {
            const double var = std::max(0.0, (sumsq - md * mean * mean) / (md - 1.0));
            se = std::sqrt(var / md);
        }
        result.series[r] = SeriesPoint{static_cast<double>(record_steps[r]) * cfg.dt, mean, se,
                                       cfg.ensemble_m};
    }
    return result;
}

RateFit fit_rate(const std::vector<SeriesPoint>& series, std::optional<double> plateau,
                 const RateFitOptions& opts) {
    if (series.size() < opts.min_points) {
        throw InvalidArgument("fit_rate: series has fewer than " + std::to_string(opts.min_points) +
                              " points");
    }
    RateFit fit;
    if (plateau) {
        fit.plateau = *plateau;
    } else {
        const std::size_t tail = std::max<std::size_t>(1, series.size() / 10);
        double sum = 0.0;
        for (std::size_t i = series.size() - tail; i < series.size(); ++i) {
            sum += series[i].mean_risk;
        }
        fit.plateau = sum / static_cast<double>(tail);
    }
    const double first = series.front().mean_risk - fit.plateau;
    if (!(first > 0.0)) {
        throw InvalidArgument("fit_rate: no positive excess above the plateau");
    }
    std::size_t begin = 0;
    while (begin < series.size() && series[begin].mean_risk - fit.plateau > opts.upper_fraction * first) {
        ++begin;
    }
    std::size_t end = begin;
    while (end < series.size() && series[end].mean_risk - fit.plateau > opts.lower_fraction * first) {
        ++end;
    }
    if (end - begin < opts.min_points) {
        throw InvalidArgument("fit_rate: decay window holds only " + std::to_string(end - begin) +
                              " points");
    }
    const double count = static_cast<double>(end - begin);
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        const double t = series[i].t;
        const double y = std::log(series[i].mean_risk - fit.plateau);
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        syy += y * y;
    }
    const double ctt = stt - st * st / count;
    const double cty = sty - st * sy / count;
    const double cyy = syy - sy * sy / count;
    if (!(ctt > 0.0)) {
        throw InvalidArgument("fit_rate: degenerate time window");
    }
    const double slope = cty / ctt;
    fit.lambda_hat = -slope;
    fit.r2 = cyy > 0.0 ? (cty * cty) / (ctt * cyy) : 1.0;
    fit.window_begin = begin;
    fit.window_end = end;
    return fit;
}

std::string series_csv(const std::vector<SeriesPoint>& series) {
    std::ostringstream os;
    os << "t,mean_risk,stderr,m\n";
    for (const auto& pt : series) {
        os << format_number(pt.t) << ',' << format_number(pt.mean_risk) << ','
           << format_number(pt.stderr_risk) << ',' << pt.m << '\n';
    }
    return os.str();
}

}  // namespace villani
