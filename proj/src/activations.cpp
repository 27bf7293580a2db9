#include "villani/activations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "villani/error.hpp"

namespace villani {

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double stable_softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double ActivationProfile::eval(double x) const {
    switch (kind) {
        case ActivationKind::Sigmoid:
            return stable_sigmoid(beta * x);
        case ActivationKind::Tanh:
            return std::tanh(x);
        case ActivationKind::SoftPlus:
            return stable_softplus(beta * x) / beta;
    }
    return 0.0;
}

std::pair<double, double> ActivationProfile::derivs(double x) const {
    switch (kind) {
        case ActivationKind::Sigmoid: {
            // sigma(1 - sigma) = sigma(z) sigma(-z); 1 - 2 sigma = sigma(-z) - sigma(z)
            const double sp = stable_sigmoid(beta * x);
            const double sm = stable_sigmoid(-beta * x);
            const double s1 = sp * sm;
            return {beta * s1, beta * beta * s1 * (sm - sp)};
        }
        case ActivationKind::Tanh: {
            const double t = std::tanh(x);
            const double sech2 = 1.0 - t * t;
            return {sech2, -2.0 * t * sech2};
        }
        case ActivationKind::SoftPlus: {
            const double sp = stable_sigmoid(beta * x);
            const double sm = stable_sigmoid(-beta * x);
            return {sp, beta * sp * sm};
        }
    }
    return {0.0, 0.0};
}

bool ActivationProfile::bounded() const { return std::isfinite(b_sigma); }

std::string ActivationProfile::name() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
        case ActivationKind::Sigmoid:
            os << "sigmoid:" << beta;
            break;
        case ActivationKind::Tanh:
            os << "tanh";
            break;
        case ActivationKind::SoftPlus:
            os << "softplus:" << beta;
            break;
    }
    return os.str();
}

ActivationProfile make_activation(ActivationKind kind, double beta) {
    ActivationProfile p;
    p.kind = kind;
    const double sqrt3 = std::sqrt(3.0);
    switch (kind) {
        case ActivationKind::Sigmoid:
            if (!(beta > 0.0) || !std::isfinite(beta)) {
                throw InvalidArgument("sigmoid beta must be a positive finite number");
            }
            p.beta = beta;
            p.b_sigma = 1.0;
            p.m_d = beta / 4.0;
            p.m_d_prime = beta * beta / (6.0 * sqrt3);
            p.c0 = 0.5;
            break;
        case ActivationKind::Tanh:
            p.beta = 1.0;
            p.b_sigma = 1.0;
            p.m_d = 1.0;
            p.m_d_prime = 4.0 / (3.0 * sqrt3);
            p.c0 = 0.0;
            break;
        case ActivationKind::SoftPlus:
            if (!(beta > 0.0) || !std::isfinite(beta)) {
                throw InvalidArgument("softplus beta must be a positive finite number");
            }
            p.beta = beta;
            p.b_sigma = std::numeric_limits<double>::infinity();
            p.m_d = 1.0;
            p.m_d_prime = beta / 4.0;
            p.c0 = std::log(2.0) / beta;
            break;
    }
    p.lipschitz_L = p.m_d;
    return p;
}

ActivationProfile parse_activation(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    double beta = 1.0;
    if (colon != std::string_view::npos) {
        const std::string tail(text.substr(colon + 1));
        std::size_t used = 0;
        try {
            beta = std::stod(tail, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != tail.size()) {
            throw InvalidArgument("bad activation parameter in '" + std::string(text) + "'");
        }
    }
    if (head == "sigmoid") {
        return make_activation(ActivationKind::Sigmoid, beta);
    }
    if (head == "tanh") {
        if (colon != std::string_view::npos) {
            throw InvalidArgument("tanh takes no parameter");
        }
        return make_activation(ActivationKind::Tanh);
    }
    if (head == "softplus") {
        return make_activation(ActivationKind::SoftPlus, beta);
    }
    throw InvalidArgument("unknown activation '" + std::string(text) + "'");
}

}  // namespace villani
