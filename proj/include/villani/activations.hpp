#pragma once

#include <string>
#include <string_view>
#include <utility>

namespace villani {

enum class ActivationKind { Sigmoid, Tanh, SoftPlus };

/// An activation together with the constants the convergence bounds consume:
/// sup|sigma| (b_sigma), Lipschitz constant, sup|sigma'| (m_d), sup|sigma''|
/// (m_d_prime) and sigma(0) (c0). Profiles are immutable values.
struct ActivationProfile {
    ActivationKind kind = ActivationKind::Sigmoid;
    double beta = 1.0;  ///< sharpness; ignored for tanh
    double b_sigma = 1.0;  ///< +inf for SoftPlus
    double lipschitz_L = 0.25;
    double m_d = 0.25;
    double m_d_prime = 0.0;
    double c0 = 0.5;

    double eval(double x) const;

    /// (sigma'(x), sigma''(x)) in closed form.
    std::pair<double, double> derivs(double x) const;

    bool bounded() const;

    /// Canonical "kind[:beta]" string, e.g. "sigmoid:1", "tanh", "softplus:4".
    std::string name() const;
};

/// Profile with the tight analytic constants. Throws InvalidArgument for beta <= 0.
ActivationProfile make_activation(ActivationKind kind, double beta = 1.0);

/// Parses "sigmoid:1.0", "tanh", "softplus:4.0" (beta defaults to 1).
ActivationProfile parse_activation(std::string_view text);

/// 1/(1+e^{-z}) evaluated without overflow for any finite z.
double stable_sigmoid(double z);

/// log(1+e^z) evaluated without overflow for any finite z.
double stable_softplus(double z);

}  // namespace villani
