#include "villani/bounds.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "villani/error.hpp"

namespace villani {

BoundInputs BoundInputs::from(const LossSpec& spec, const NetState& net) {
    if (net.dim() != spec.data.dim()) {
        throw DimensionMismatch("bounds: net and data dimensions differ");
    }
    return BoundInputs{spec.activation, net.a_norm, spec.data.b_x, spec.lambda, net.width(),
                       net.dim()};
}

double BoundInputs::c_norm() const {
    return std::abs(act.c0) * std::sqrt(static_cast<double>(p));
}

double lambda_c(const ActivationProfile& act, double a_norm, double b_x, LambdaCVariant variant) {
    const double base = act.m_d * act.lipschitz_L * b_x * b_x * a_norm * a_norm;
    return variant == LambdaCVariant::Lemma ? base / 2.0 : 2.0 * base;
}

GradLowerCoeffs grad_lower_coeffs(const BoundInputs& in) {
    const double a = in.a_norm;
    const double md = in.act.m_d;
    const double bx = in.b_x;
    const double lam = in.lambda;
    GradLowerCoeffs c;
    c.quadratic = lam * lam - lam * a * a * md * bx * bx * in.act.lipschitz_L / 2.0;
    c.linear = lam * a * md * bx * (1.0 + a * in.c_norm() / 2.0);
    return c;
}

LapUpperCoeffs lap_upper_coeffs(const BoundInputs& in) {
    const double a = in.a_norm;
    const double bx = in.b_x;
    const double p = static_cast<double>(in.p);
    const double d = static_cast<double>(in.d);
    const double curv = bx * bx * in.act.m_d_prime * a;
    LapUpperCoeffs c;
    c.constant = p * ((2.0 + in.c_norm()) / 4.0 * curv + in.act.m_d * in.act.m_d * bx * bx * a * a / 4.0 +
                      in.lambda * d);
    c.linear = p * (a * in.act.lipschitz_L * bx / 4.0) * curv;
    return c;
}

double grad_lower_bound(const BoundInputs& in, double w_fro) {
    if (w_fro < 0.0) {
        throw InvalidArgument("grad_lower_bound: w_fro must be >= 0");
    }
    const auto c = grad_lower_coeffs(in);
    return c.quadratic * w_fro * w_fro - c.linear * w_fro;
}

double laplacian_upper_bound(const BoundInputs& in, double w_fro) {
    if (w_fro < 0.0) {
        throw InvalidArgument("laplacian_upper_bound: w_fro must be >= 0");
    }
    const auto c = lap_upper_coeffs(in);
    return c.constant + c.linear * w_fro;
}

double glip_bound(const BoundInputs& in, GlipForm form) {
    if (!in.act.bounded()) {
        throw UnboundedActivation("gLip bound needs a bounded activation, got " + in.act.name());
    }
    const double sp = std::sqrt(static_cast<double>(in.p));
    const double p = static_cast<double>(in.p);
    const double a = in.a_norm;
    const double bx = in.b_x;
    const double md = in.act.m_d;
    const double mdp = in.act.m_d_prime;
    const double mix = (2.0 + in.c_norm() + a * in.act.b_sigma) / 4.0;
    if (form == GlipForm::Concluding) {
        return sp * (sp * a * md * md * bx / 4.0 + mix * mdp * bx * p + in.lambda);
    }
    return sp * (a * a * md * md * bx * bx * sp / 4.0 + mix * mdp * bx * bx * a * p + in.lambda);
}

double v_s(const LossSpec& spec, const NetState& net, double s) {
    if (!(s > 0.0)) {
        throw InvalidArgument("v_s: s must be > 0");
    }
    return full_grad(spec, net).squaredNorm() / s - exact_laplacian(spec, net);
}

VillaniReport verify_villani(const LossSpec& spec, const NetState& net, double s,
                             const VillaniOptions& opts) {
    if (!(s > 0.0)) {
        throw InvalidArgument("verify_villani: s must be > 0");
    }
    const BoundInputs in = BoundInputs::from(spec, net);
    VillaniReport r;
    r.lambda = spec.lambda;
    r.s = s;
    r.lambda_c_lemma = lambda_c(in.act, in.a_norm, in.b_x, LambdaCVariant::Lemma);
    r.lambda_c_proof = lambda_c(in.act, in.a_norm, in.b_x, LambdaCVariant::Proof);
    const double base = in.act.m_d * in.act.lipschitz_L * in.b_x * in.b_x * in.a_norm * in.a_norm;
    r.g1 = in.lambda * in.lambda - 2.0 * in.lambda * base;
    r.g1_lemma = in.lambda * in.lambda - in.lambda * base / 2.0;
    if (in.act.bounded()) {
        r.glip_bound = glip_bound(in);
        r.glip_note =
            "concluding display uses M_D^2 B_x and ||a||; the per-row constant carries "
            "B_x^2 and ||a||^2";
    } else {
        r.glip_bound = std::numeric_limits<double>::quiet_NaN();
        r.glip_note = "unbounded activation: no gLip bound";
    }
    r.grad_lb_coeffs = grad_lower_coeffs(in);
    r.lap_ub_coeffs = lap_upper_coeffs(in);
    r.minorant_quadratic = r.grad_lb_coeffs.quadratic / s;
    r.minorant_linear = r.grad_lb_coeffs.linear / s + r.lap_ub_coeffs.linear;
    r.minorant_constant = -r.lap_ub_coeffs.constant;
    r.variant = opts.variant == LambdaCVariant::Lemma ? "lemma" : "proof";
    const double g1_used = opts.variant == LambdaCVariant::Lemma ? r.g1_lemma : r.g1;
    r.quadratic_positive = g1_used > 0.0;

    r.radius_schedule = opts.radius_schedule;
    if (r.radius_schedule.empty()) {
        for (int k = 0; k <= 10; ++k) {
            r.radius_schedule.push_back(std::ldexp(1.0, k));
        }
    }
    r.directions = opts.directions;
    r.high_water = opts.high_water;

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    bool dominated = true;
    bool crossed = opts.directions > 0;
    double min_terminal = std::numeric_limits<double>::infinity();
    NetState probe = net;
    for (int k = 0; k < opts.directions; ++k) {
        MatrixXd u(net.width(), net.dim());
        for (Index i = 0; i < u.size(); ++i) {
            u.data()[i] = normal(rng);
        }
        u /= u.norm();
        bool ray_crossed = false;
        double last = 0.0;
        for (double radius : r.radius_schedule) {
            probe.inner = radius * u;
            const double v = v_s(spec, probe, s);
            const double minorant = r.minorant_quadratic * radius * radius -
                                    r.minorant_linear * radius + r.minorant_constant;
            // relative slack for rounding in the sampled V_s
            if (v < minorant - 1e-9 * (1.0 + std::abs(minorant))) {
                dominated = false;
            }
            if (v > opts.high_water) {
                ray_crossed = true;
            }
            last = v;
        }
        min_terminal = std::min(min_terminal, last);
        crossed = crossed && ray_crossed;
    }
    r.dominance_ok = dominated;
    r.high_water_crossed = crossed;
    r.min_terminal_v = opts.directions > 0 ? min_terminal : 0.0;
    r.divergence_verified = r.quadratic_positive && r.dominance_ok && r.high_water_crossed;
    return r;
}

nlohmann::json to_json(const VillaniReport& r) {
    nlohmann::json j;
    j["lambda"] = r.lambda;
    j["s"] = r.s;
    j["lambda_c_lemma"] = r.lambda_c_lemma;
    j["lambda_c_proof"] = r.lambda_c_proof;
    j["g1"] = r.g1;
    j["g1_lemma"] = r.g1_lemma;
    j["glip_bound"] = std::isfinite(r.glip_bound) ? nlohmann::json(r.glip_bound) : nlohmann::json(nullptr);
    j["grad_lb_coeffs"] = {r.grad_lb_coeffs.quadratic, r.grad_lb_coeffs.linear};
    j["lap_ub_coeffs"] = {r.lap_ub_coeffs.constant, r.lap_ub_coeffs.linear};
    j["minorant"] = {r.minorant_quadratic, r.minorant_linear, r.minorant_constant};
    j["quadratic_positive"] = r.quadratic_positive;
    j["dominance_ok"] = r.dominance_ok;
    j["high_water_crossed"] = r.high_water_crossed;
    j["divergence_verified"] = r.divergence_verified;
    j["min_terminal_v"] = r.min_terminal_v;
    j["radius_schedule"] = r.radius_schedule;
    j["directions"] = r.directions;
    j["high_water"] = r.high_water;
    j["variant"] = r.variant;
    j["glip_note"] = r.glip_note;
    return j;
}

}  // namespace villani
