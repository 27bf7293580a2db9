#pragma once

#include <cmath>
#include <random>

#include "villani/net_loss.hpp"

namespace testing_support {

using villani::Index;
using villani::MatrixXd;
using villani::VectorXd;

inline MatrixXd normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
    std::normal_distribution<double> n;
    MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = scale * n(rng);
    }
    return m;
}

inline VectorXd random_labels(std::mt19937_64& rng, Index n) {
    std::bernoulli_distribution coin(0.5);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        y(i) = coin(rng) ? 1.0 : -1.0;
    }
    return y;
}

struct Instance {
    villani::LossSpec spec;
    villani::NetState net;
};

/// Rows scaled to norm <= b_x_max, outer layer normalized to norm a_norm.
inline Instance random_instance(std::mt19937_64& rng, Index n, Index d, Index p,
                                const villani::ActivationProfile& act, double lambda,
                                double w_scale = 1.0, double b_x_max = 1.0, double a_norm = 1.0) {
    MatrixXd x = normal_matrix(rng, n, d);
    std::uniform_real_distribution<double> u(0.2, 1.0);
    for (Index i = 0; i < n; ++i) {
        x.row(i) *= b_x_max * u(rng) / x.row(i).norm();
    }
    VectorXd a = normal_matrix(rng, p, 1).col(0);
    a *= a_norm / a.norm();
    auto data = villani::LabeledDataset::create(x, random_labels(rng, n));
    auto spec = villani::LossSpec::create(std::move(data), act, lambda);
    auto net = villani::NetState::create(a, normal_matrix(rng, p, d, w_scale));
    return {std::move(spec), std::move(net)};
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace testing_support
