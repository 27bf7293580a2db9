#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "villani/net_loss.hpp"

namespace villani {

/// Scalars the analytic bounds consume. ||c||_2 is reconstructed as |c0| sqrt(p).
struct BoundInputs {
    ActivationProfile act;
    double a_norm = 0.0;
    double b_x = 0.0;
    double lambda = 0.0;
    Index p = 1;
    Index d = 1;

    static BoundInputs from(const LossSpec& spec, const NetState& net);

    double c_norm() const;
};

enum class LambdaCVariant {
    Lemma,  ///< M_D L B_x^2 ||a||^2 / 2 (default)
    Proof,  ///< 2 M_D L B_x^2 ||a||^2 (conservative)
};

double lambda_c(const ActivationProfile& act, double a_norm, double b_x, LambdaCVariant variant);

/// Quadratic minorant of ||grad L||_F^2 as a function of ||W||_F:
///   quadratic * r^2 - linear * r
struct GradLowerCoeffs {
    double quadratic = 0.0;
    double linear = 0.0;
};

/// Affine majorant of the Laplacian: constant + linear * r.
struct LapUpperCoeffs {
    double constant = 0.0;
    double linear = 0.0;
};

GradLowerCoeffs grad_lower_coeffs(const BoundInputs& in);
LapUpperCoeffs lap_upper_coeffs(const BoundInputs& in);

double grad_lower_bound(const BoundInputs& in, double w_fro);
double laplacian_upper_bound(const BoundInputs& in, double w_fro);

enum class GlipForm {
    Concluding,  ///< the closing display, one power of B_x and ||a||
    PerRow,      ///< sqrt(p) times the per-row Lipschitz constant (B_x^2, ||a||^2)
};

/// Upper bound on the gradient-Lipschitz constant. Throws UnboundedActivation for SoftPlus.
double glip_bound(const BoundInputs& in, GlipForm form = GlipForm::Concluding);

/// V_s(W) = ||grad L||_F^2 / s - Laplacian(L). Throws InvalidArgument for s <= 0.
double v_s(const LossSpec& spec, const NetState& net, double s);

struct VillaniOptions {
    std::vector<double> radius_schedule;  ///< empty -> 2^k, k = 0..10
    int directions = 10;
    double high_water = 1e6;
    std::uint64_t seed = 0;
    LambdaCVariant variant = LambdaCVariant::Lemma;
};

struct VillaniReport {
    double lambda = 0.0;
    double s = 0.0;
    double lambda_c_lemma = 0.0;
    double lambda_c_proof = 0.0;
    double g1 = 0.0;           ///< lambda^2 - 2 lambda M_D L B_x^2 ||a||^2
    double g1_lemma = 0.0;  ///< lambda^2 - lambda ||a||^2 M_D B_x^2 L / 2
    double glip_bound = 0.0;   ///< NaN when the activation is unbounded
    GradLowerCoeffs grad_lb_coeffs;
    LapUpperCoeffs lap_ub_coeffs;
    /// Minorant of V_s: g1s r^2 - g2 r + g3 with g1s = quadratic / s.
    double minorant_quadratic = 0.0;
    double minorant_linear = 0.0;
    double minorant_constant = 0.0;
    bool quadratic_positive = false;
    bool dominance_ok = false;
    bool high_water_crossed = false;
    bool divergence_verified = false;
    double min_terminal_v = 0.0;
    std::vector<double> radius_schedule;
    int directions = 0;
    double high_water = 0.0;
    std::string variant;
    std::string glip_note;
};

/// Evaluates the analytic minorant and samples V_s along random rays r U, ||U||_F = 1.
VillaniReport verify_villani(const LossSpec& spec, const NetState& net, double s,
                             const VillaniOptions& opts = {});

nlohmann::json to_json(const VillaniReport& report);

}  // namespace villani
