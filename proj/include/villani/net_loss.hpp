#pragma once

#include <span>

#include <Eigen/Dense>

#include "villani/activations.hpp"

namespace villani {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// n feature rows in R^d with +-1 labels. b_x is the largest row 2-norm.
struct LabeledDataset {
    MatrixXd features;  ///< n x d
    VectorXd labels;    ///< n, entries +-1
    double b_x = 0.0;

    /// Validates shapes, labels and finiteness; computes b_x.
    static LabeledDataset create(MatrixXd features, VectorXd labels);

    Index size() const { return features.rows(); }
    Index dim() const { return features.cols(); }
};

/// Depth-2 net f(x) = a^T sigma(W x) with fixed outer layer a.
struct NetState {
    VectorXd outer;  ///< a, length p
    MatrixXd inner;  ///< W, p x d
    double a_norm = 0.0;

    static NetState create(VectorXd outer, MatrixXd inner);

    Index width() const { return inner.rows(); }
    Index dim() const { return inner.cols(); }
};

/// Dataset + activation + Frobenius regularizer weight lambda.
struct LossSpec {
    LabeledDataset data;
    ActivationProfile activation;
    double lambda = 0.0;

    static LossSpec create(LabeledDataset data, ActivationProfile activation, double lambda);
};

// Logistic loss l(z) = log(1 + e^{-z}) and its derivatives, all routed through
// the stable sigmoid: l'(z) = -sigmoid(-z), l''(z) = sigmoid(z) sigmoid(-z).
double logistic_loss(double z);
double logistic_d1(double z);
double logistic_d2(double z);

double forward(const ActivationProfile& act, const NetState& net,
               const Eigen::Ref<const VectorXd>& x);

/// Outputs f(x_i) for every row of `features`.
VectorXd forward_batch(const ActivationProfile& act, const NetState& net,
                       const Eigen::Ref<const MatrixXd>& features);

/// (1/n) sum_i l(y_i f(x_i)) + (lambda/2) ||W||_F^2
double risk(const LossSpec& spec, const NetState& net);

/// Row j is a_j sigma'(w_j . x) x^T.
MatrixXd per_sample_net_grad(const ActivationProfile& act, const NetState& net,
                             const Eigen::Ref<const VectorXd>& x);

MatrixXd full_grad(const LossSpec& spec, const NetState& net);

/// (1/b) sum_{i in batch} grad l(y_i f_i), without the regularizer. Indices may repeat.
MatrixXd batch_logistic_grad(const LossSpec& spec, const NetState& net, std::span<const Index> batch);

/// batch_logistic_grad + lambda W.
MatrixXd minibatch_grad(const LossSpec& spec, const NetState& net, std::span<const Index> batch);

/// Sum of the p*d unmixed second partials of the risk.
double exact_laplacian(const LossSpec& spec, const NetState& net);

/// Fraction of rows with sign(f(x_i)) == y_i; f == 0 counts as an error.
double accuracy(const ActivationProfile& act, const LabeledDataset& data, const NetState& net);

}  // namespace villani
