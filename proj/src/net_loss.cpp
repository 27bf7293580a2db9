#include "villani/net_loss.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "villani/error.hpp"

namespace villani {

namespace {

void require_dims(const NetState& net, Index d, const char* what) {
    if (net.dim() != d) {
        throw DimensionMismatch(std::string(what) + ": net expects d=" + std::to_string(net.dim()) +
                                ", got " + std::to_string(d));
    }
}

void require_finite(const MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw InvalidArgument(std::string(what) + " contains non-finite entries");
    }
}

// Pre-activations U = X W^T for a set of rows, plus the per-row outputs.
struct Activations {
    MatrixXd pre;     // b x p
    VectorXd output;  // b
};

Activations activate(const NetState& net, const ActivationProfile& act,
                     const Eigen::Ref<const MatrixXd>& rows) {
    Activations out;
    out.pre = rows * net.inner.transpose();
    MatrixXd s = out.pre.unaryExpr([&act](double u) { return act.eval(u); });
    out.output = s * net.outer;
    return out;
}

// Logistic-term gradient summed (not averaged) over `rows`.
MatrixXd logistic_grad_sum(const LossSpec& spec, const NetState& net,
                           const Eigen::Ref<const MatrixXd>& rows,
                           const Eigen::Ref<const VectorXd>& labels) {
    const auto& act = spec.activation;
    const Activations a = activate(net, act, rows);
    MatrixXd coeff(a.pre.rows(), a.pre.cols());
    for (Index i = 0; i < a.pre.rows(); ++i) {
        const double y = labels(i);
        const double c = logistic_d1(y * a.output(i)) * y;
        for (Index j = 0; j < a.pre.cols(); ++j) {
            coeff(i, j) = c * net.outer(j) * act.derivs(a.pre(i, j)).first;
        }
    }
    return coeff.transpose() * rows;
}

}  // namespace

LabeledDataset LabeledDataset::create(MatrixXd features, VectorXd labels) {
    if (features.rows() < 1 || features.cols() < 1) {
        throw InvalidArgument("dataset needs n >= 1 and d >= 1");
    }
    if (labels.size() != features.rows()) {
        throw DimensionMismatch("dataset: " + std::to_string(features.rows()) + " rows but " +
                                std::to_string(labels.size()) + " labels");
    }
    require_finite(features, "dataset features");
    for (Index i = 0; i < labels.size(); ++i) {
        if (labels(i) != 1.0 && labels(i) != -1.0) {
            throw InvalidArgument("labels must be +1 or -1");
        }
    }
    LabeledDataset ds;
    ds.b_x = features.rowwise().norm().maxCoeff();
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    return ds;
}

NetState NetState::create(VectorXd outer, MatrixXd inner) {
    if (outer.size() < 1 || inner.rows() != outer.size() || inner.cols() < 1) {
        throw DimensionMismatch("net: outer has length " + std::to_string(outer.size()) +
                                ", inner is " + std::to_string(inner.rows()) + "x" +
                                std::to_string(inner.cols()));
    }
    require_finite(outer, "outer weights");
    require_finite(inner, "inner weights");
    NetState net;
    net.a_norm = outer.norm();
    net.outer = std::move(outer);
    net.inner = std::move(inner);
    return net;
}

LossSpec LossSpec::create(LabeledDataset data, ActivationProfile activation, double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw InvalidArgument("lambda must be finite and >= 0");
    }
    return LossSpec{std::move(data), activation, lambda};
}

double logistic_loss(double z) { return stable_softplus(-z); }

double logistic_d1(double z) { return -stable_sigmoid(-z); }

double logistic_d2(double z) { return stable_sigmoid(z) * stable_sigmoid(-z); }

double forward(const ActivationProfile& act, const NetState& net,
               const Eigen::Ref<const VectorXd>& x) {
    require_dims(net, x.size(), "forward");
    double f = 0.0;
    for (Index j = 0; j < net.width(); ++j) {
        f += net.outer(j) * act.eval(net.inner.row(j).dot(x));
    }
    return f;
}

VectorXd forward_batch(const ActivationProfile& act, const NetState& net,
                       const Eigen::Ref<const MatrixXd>& features) {
    require_dims(net, features.cols(), "forward_batch");
    return activate(net, act, features).output;
}

double risk(const LossSpec& spec, const NetState& net) {
    require_dims(net, spec.data.dim(), "risk");
    const VectorXd f = forward_batch(spec.activation, net, spec.data.features);
    double sum = 0.0;
    for (Index i = 0; i < f.size(); ++i) {
        sum += logistic_loss(spec.data.labels(i) * f(i));
    }
    return sum / static_cast<double>(f.size()) + 0.5 * spec.lambda * net.inner.squaredNorm();
}

MatrixXd per_sample_net_grad(const ActivationProfile& act, const NetState& net,
                             const Eigen::Ref<const VectorXd>& x) {
    require_dims(net, x.size(), "per_sample_net_grad");
    MatrixXd g(net.width(), net.dim());
    for (Index j = 0; j < net.width(); ++j) {
        const double slope = act.derivs(net.inner.row(j).dot(x)).first;
        g.row(j) = (net.outer(j) * slope) * x.transpose();
    }
    return g;
}

MatrixXd full_grad(const LossSpec& spec, const NetState& net) {
    require_dims(net, spec.data.dim(), "full_grad");
    const double n = static_cast<double>(spec.data.size());
    MatrixXd g = logistic_grad_sum(spec, net, spec.data.features, spec.data.labels);
    g /= n;
    g += spec.lambda * net.inner;
    return g;
}

MatrixXd batch_logistic_grad(const LossSpec& spec, const NetState& net,
                             std::span<const Index> batch) {
    require_dims(net, spec.data.dim(), "minibatch_grad");
    if (batch.empty()) {
        throw InvalidArgument("minibatch_grad: empty batch");
    }
    const Index n = spec.data.size();
    MatrixXd rows(static_cast<Index>(batch.size()), spec.data.dim());
    VectorXd labels(static_cast<Index>(batch.size()));
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const Index i = batch[k];
        if (i < 0 || i >= n) {
            throw InvalidArgument("minibatch_grad: index " + std::to_string(i) + " out of range");
        }
        rows.row(static_cast<Index>(k)) = spec.data.features.row(i);
        labels(static_cast<Index>(k)) = spec.data.labels(i);
    }
    MatrixXd g = logistic_grad_sum(spec, net, rows, labels);
    g /= static_cast<double>(batch.size());
    return g;
}

MatrixXd minibatch_grad(const LossSpec& spec, const NetState& net, std::span<const Index> batch) {
    MatrixXd g = batch_logistic_grad(spec, net, batch);
    g += spec.lambda * net.inner;
    return g;
}

double exact_laplacian(const LossSpec& spec, const NetState& net) {
    require_dims(net, spec.data.dim(), "exact_laplacian");
    const auto& act = spec.activation;
    const auto& x = spec.data.features;
    const Activations a = activate(net, act, x);
    double sum = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        const double y = spec.data.labels(i);
        const double m = y * a.output(i);
        const double d1 = logistic_d1(m);
        const double d2 = logistic_d2(m);
        double inner = 0.0;
        for (Index j = 0; j < net.width(); ++j) {
            const auto [s1, s2] = act.derivs(a.pre(i, j));
            const double g = net.outer(j) * s1;
            inner += d2 * g * g + d1 * y * net.outer(j) * s2;
        }
        sum += inner * x.row(i).squaredNorm();
    }
    return sum / static_cast<double>(x.rows()) +
           spec.lambda * static_cast<double>(net.width() * net.dim());
}

double accuracy(const ActivationProfile& act, const LabeledDataset& data, const NetState& net) {
    const VectorXd f = forward_batch(act, net, data.features);
    Index correct = 0;
    for (Index i = 0; i < f.size(); ++i) {
        if (f(i) * data.labels(i) > 0.0) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(f.size());
}

}  // namespace villani
