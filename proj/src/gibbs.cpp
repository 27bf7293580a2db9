#include "villani/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Sparse>

#include "villani/error.hpp"
#include "villani/rng.hpp"

namespace villani {

namespace {

constexpr double kTailTol = 1e-8;
constexpr double kRichardsonTol = 1e-6;
constexpr double kRefinementTol = 0.05;

// Uniform tensor grid over [-R, R]^dim with trapezoid weights.
struct Grid {
    int dim = 1;
    int n = 64;
    double radius = 1.0;
    double h = 0.0;

    Grid(int dim_, int n_, double radius_)
        : dim(dim_), n(n_), radius(radius_), h(2.0 * radius_ / n_) {}

    Index per_axis() const { return n + 1; }
    Index count() const { return dim == 1 ? per_axis() : per_axis() * per_axis(); }

    double coord(Index i) const { return -radius + static_cast<double>(i) * h; }

    VectorXd point(Index idx) const {
        VectorXd w(dim);
        if (dim == 1) {
            w(0) = coord(idx);
        } else {
            w(0) = coord(idx % per_axis());
            w(1) = coord(idx / per_axis());
        }
        return w;
    }

    double axis_weight(Index i) const { return (i == 0 || i == n) ? 0.5 * h : h; }

    double weight(Index idx) const {
        if (dim == 1) {
            return axis_weight(idx);
        }
        return axis_weight(idx % per_axis()) * axis_weight(idx / per_axis());
    }
};

struct Field {
    Grid grid;
    std::vector<double> f;
    double f_min = 0.0;
};

Field evaluate(const GibbsLab& lab, int n) {
    Field field{Grid(lab.potential.dim, n, lab.box_radius), {}, 0.0};
    const Index count = field.grid.count();
    field.f.resize(static_cast<std::size_t>(count));
    field.f_min = std::numeric_limits<double>::infinity();
    for (Index idx = 0; idx < count; ++idx) {
        const double v = lab.potential.value(field.grid.point(idx));
        if (!std::isfinite(v)) {
            throw NumericalError("potential is not finite on the grid");
        }
        field.f[static_cast<std::size_t>(idx)] = v;
        field.f_min = std::min(field.f_min, v);
    }
    return field;
}

// Relative Gibbs weight exp(-2 (f - f_min) / s) at every node.
std::vector<double> relative_density(const Field& field, double s) {
    std::vector<double> mu(field.f.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        mu[i] = std::exp(-2.0 * (field.f[i] - field.f_min) / s);
    }
    return mu;
}

double log_partition(const Field& field, double s) {
    const auto mu = relative_density(field, s);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        sum += field.grid.weight(static_cast<Index>(i)) * mu[i];
    }
    return -2.0 * field.f_min / s + std::log(sum);
}

// log of the analytic bound on the mass of exp(-2 f / s) outside the box.
double log_tail_bound(const Potential& pot, double radius, double s) {
    const double kappa = pot.minorant_curvature;
    if (!(kappa > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    const double g1 = std::sqrt(std::numbers::pi * s / kappa);
    const double e = std::erfc(radius * std::sqrt(kappa / s));
    const double out = pot.dim == 1 ? g1 * e : g1 * g1 * (2.0 * e - e * e);
    if (out <= 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return -2.0 * pot.minorant_offset / s + std::log(out);
}

void check_tail(const GibbsLab& lab, double log_z, double* rel_out = nullptr) {
    const double log_tail = log_tail_bound(lab.potential, lab.box_radius, lab.temp_s);
    const double rel = std::exp(log_tail - log_z);
    if (rel_out != nullptr) {
        *rel_out = rel;
    }
    if (!(rel <= kTailTol)) {
        throw NumericalError("Gibbs mass outside the box may exceed 1e-8 of Z_s (bound " +
                             std::to_string(rel) + "); enlarge box_radius");
    }
}

// Prepared quadrature state shared by the integral-type operations.
struct Quadrature {
    Field field;
    std::vector<double> mu;
    double mass = 0.0;  // sum of weights * mu
};

Quadrature prepare(const GibbsLab& lab) {
    lab.validate();
    Quadrature q{evaluate(lab, lab.grid_n), {}, 0.0};
    q.mu = relative_density(q.field, lab.temp_s);
    for (std::size_t i = 0; i < q.mu.size(); ++i) {
        q.mass += q.field.grid.weight(static_cast<Index>(i)) * q.mu[i];
    }
    check_tail(lab, -2.0 * q.field.f_min / lab.temp_s + std::log(q.mass));
    return q;
}

// Symmetrized generator on the (optionally masked) grid. With geometric-mean
// face weights the off-diagonal entries do not depend on mu at all.
struct Generator {
    Eigen::SparseMatrix<double> sym;
    VectorXd null_vec;  // normalized sqrt(pi)
    std::vector<Index> nodes;
    std::vector<double> weights;
    std::vector<double> mu;
    struct Face {
        Index a, b;
        double kappa;
    };
    std::vector<Face> faces;
};

Generator build_generator(const GibbsLab& lab, int n, std::optional<double> ball) {
    const Field field = evaluate(lab, n);
    const Grid& g = field.grid;
    const double s = lab.temp_s;
    std::vector<Index> local(static_cast<std::size_t>(g.count()), -1);
    Generator gen;
    for (Index idx = 0; idx < g.count(); ++idx) {
        if (ball && g.point(idx).norm() > *ball) {
            continue;
        }
        local[static_cast<std::size_t>(idx)] = static_cast<Index>(gen.nodes.size());
        gen.nodes.push_back(idx);
    }
    const Index count = static_cast<Index>(gen.nodes.size());
    if (count < 3) {
        throw InvalidArgument("spectral gap: fewer than 3 grid nodes in the domain");
    }
    gen.weights.resize(static_cast<std::size_t>(count));
    gen.mu.resize(static_cast<std::size_t>(count));
    for (Index k = 0; k < count; ++k) {
        const Index idx = gen.nodes[static_cast<std::size_t>(k)];
        gen.weights[static_cast<std::size_t>(k)] = g.weight(idx);
        gen.mu[static_cast<std::size_t>(k)] =
            std::exp(-2.0 * (field.f[static_cast<std::size_t>(idx)] - field.f_min) / s);
    }

    auto add_face = [&](Index ia, Index ib, double cross) {
        const Index a = local[static_cast<std::size_t>(ia)];
        const Index b = local[static_cast<std::size_t>(ib)];
        if (a >= 0 && b >= 0) {
            gen.faces.push_back({a, b, cross / g.h});
        }
    };
    const Index m = g.per_axis();
    if (g.dim == 1) {
        for (Index i = 0; i + 1 < m; ++i) {
            add_face(i, i + 1, 1.0);
        }
    } else {
        for (Index j = 0; j < m; ++j) {
            for (Index i = 0; i < m; ++i) {
                const Index idx = i + m * j;
                if (i + 1 < m) {
                    add_face(idx, idx + 1, g.axis_weight(j));
                }
                if (j + 1 < m) {
                    add_face(idx, idx + m, g.axis_weight(i));
                }
            }
        }
    }

    std::vector<double> diag(static_cast<std::size_t>(count), 0.0);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(gen.faces.size() * 2 + static_cast<std::size_t>(count));
    for (const auto& face : gen.faces) {
        const auto a = static_cast<std::size_t>(face.a);
        const auto b = static_cast<std::size_t>(face.b);
        const double c = 0.5 * s * face.kappa;
        const double off = -c / std::sqrt(gen.weights[a] * gen.weights[b]);
        trips.emplace_back(face.a, face.b, off);
        trips.emplace_back(face.b, face.a, off);
        const double fa = field.f[static_cast<std::size_t>(gen.nodes[a])];
        const double fb = field.f[static_cast<std::size_t>(gen.nodes[b])];
        // sqrt(mu_b / mu_a) = exp(-(f_b - f_a) / s)
        diag[a] += c * std::exp(-(fb - fa) / s) / gen.weights[a];
        diag[b] += c * std::exp(-(fa - fb) / s) / gen.weights[b];
    }
    for (Index k = 0; k < count; ++k) {
        trips.emplace_back(k, k, diag[static_cast<std::size_t>(k)]);
    }
    gen.sym.resize(count, count);
    gen.sym.setFromTriplets(trips.begin(), trips.end());
    gen.sym.makeCompressed();

    gen.null_vec.resize(count);
    for (Index k = 0; k < count; ++k) {
        gen.null_vec(k) =
            std::sqrt(gen.weights[static_cast<std::size_t>(k)] * gen.mu[static_cast<std::size_t>(k)]);
    }
    gen.null_vec.normalize();
    return gen;
}

// Smallest nonzero eigenvalue of the PSD operator with the known one-dimensional
// kernel spanned by gen.null_vec: block inverse iteration on the pseudo-inverse
// (grounded at the node where the kernel vector peaks) with Rayleigh-Ritz.
double smallest_nonzero_eigenvalue(const Generator& gen) {
    const Eigen::SparseMatrix<double>& s = gen.sym;
    const Index n = s.rows();
    const VectorXd& q = gen.null_vec;
    Index ground = 0;
    q.cwiseAbs().maxCoeff(&ground);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(s.nonZeros()));
    auto shrink = [ground](Index i) { return i < ground ? i : i - 1; };
    for (Index col = 0; col < s.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(s, col); it; ++it) {
            if (it.row() != ground && it.col() != ground) {
                trips.emplace_back(shrink(it.row()), shrink(it.col()), it.value());
            }
        }
    }
    Eigen::SparseMatrix<double> reduced(n - 1, n - 1);
    reduced.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(reduced);
    if (ldlt.info() != Eigen::Success) {
        throw NumericalError("spectral gap: factorization of the grounded generator failed");
    }

    auto project = [&q](MatrixXd& v) { v -= q * (q.transpose() * v); };
    auto apply_pinv = [&](const MatrixXd& v) {
        MatrixXd rhs = v;
        project(rhs);
        MatrixXd small(n - 1, rhs.cols());
        for (Index i = 0; i < n; ++i) {
            if (i != ground) {
                small.row(shrink(i)) = rhs.row(i);
            }
        }
        const MatrixXd sol = ldlt.solve(small);
        MatrixXd out = MatrixXd::Zero(n, rhs.cols());
        for (Index i = 0; i < n; ++i) {
            if (i != ground) {
                out.row(i) = sol.row(shrink(i));
            }
        }
        project(out);
        return out;
    };

    const Index block = std::min<Index>(6, n - 1);
    Rng rng(0x5eed);
    MatrixXd v(n, block);
    fill_normal(v, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 3000; ++iter) {
        MatrixXd z = apply_pinv(v);
        Eigen::HouseholderQR<MatrixXd> qr(z);
        MatrixXd basis = qr.householderQ() * MatrixXd::Identity(n, block);
        project(basis);
        Eigen::HouseholderQR<MatrixXd> qr2(basis);
        basis = qr2.householderQ() * MatrixXd::Identity(n, block);
        const MatrixXd sv = s * basis;
        MatrixXd h = basis.transpose() * sv;
        h = 0.5 * (h + h.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
        if (eig.info() != Eigen::Success) {
            throw NumericalError("spectral gap: Rayleigh-Ritz eigen-solve failed");
        }
        const double theta = eig.eigenvalues()(0);
        v = basis * eig.eigenvectors();
        if (iter >= 2 && std::abs(theta - prev) <= 1e-13 * std::abs(theta)) {
            return theta;
        }
        prev = theta;
    }
    throw NumericalError("spectral gap: block inverse iteration did not converge");
}

double taper_1d(double u) {
    const double a = std::abs(u);
    if (a <= 0.7) {
        return 1.0;
    }
    if (a >= 0.95) {
        return 0.0;
    }
    const double t = (a - 0.7) / 0.25;
    const double c = std::cos(0.5 * std::numbers::pi * t);
    return c * c;
}

double taper_1d_deriv(double u) {
    const double a = std::abs(u);
    if (a <= 0.7 || a >= 0.95) {
        return 0.0;
    }
    const double t = (a - 0.7) / 0.25;
    const double dt = -0.5 * std::numbers::pi * std::sin(std::numbers::pi * t) / 0.25;
    return u > 0 ? dt : -dt;
}

}  // namespace

Potential Potential::from_loss(const LossSpec& spec, const VectorXd& outer) {
    const Index p = outer.size();
    const Index d = spec.data.dim();
    if (p * d > 2) {
        throw InvalidArgument("Gibbs lab supports at most 2 trainable parameters (p*d <= 2)");
    }
    if (!(spec.lambda > 0.0)) {
        throw InvalidArgument("Gibbs lab needs lambda > 0 for a normalizable measure");
    }
    const NetState base = NetState::create(outer, MatrixXd::Zero(p, d));
    auto to_net = [base, p, d](const VectorXd& w) {
        NetState net = base;
        for (Index j = 0; j < p; ++j) {
            for (Index k = 0; k < d; ++k) {
                net.inner(j, k) = w(j * d + k);
            }
        }
        return net;
    };
    Potential pot;
    pot.dim = static_cast<int>(p * d);
    pot.value = [spec, to_net](const VectorXd& w) { return risk(spec, to_net(w)); };
    pot.gradient = [spec, to_net, p, d](const VectorXd& w) {
        const MatrixXd g = full_grad(spec, to_net(w));
        VectorXd out(p * d);
        for (Index j = 0; j < p; ++j) {
            for (Index k = 0; k < d; ++k) {
                out(j * d + k) = g(j, k);
            }
        }
        return out;
    };
    pot.laplacian = [spec, to_net](const VectorXd& w) { return exact_laplacian(spec, to_net(w)); };
    pot.minorant_curvature = spec.lambda;
    pot.minorant_offset = 0.0;
    return pot;
}

Potential Potential::quadratic(double lambda, int dim) {
    if (!(lambda > 0.0) || dim < 1 || dim > 2) {
        throw InvalidArgument("quadratic potential needs lambda > 0 and dim in {1, 2}");
    }
    Potential pot;
    pot.dim = dim;
    pot.value = [lambda](const VectorXd& w) { return 0.5 * lambda * w.squaredNorm(); };
    pot.gradient = [lambda](const VectorXd& w) -> VectorXd { return lambda * w; };
    pot.laplacian = [lambda, dim](const VectorXd&) { return lambda * dim; };
    pot.minorant_curvature = lambda;
    return pot;
}

Potential Potential::double_well(double lambda) {
    if (!(lambda > 0.0)) {
        throw InvalidArgument("double well needs lambda > 0");
    }
    Potential pot;
    pot.dim = 1;
    pot.value = [lambda](const VectorXd& w) {
        const double x = w(0);
        const double u = x * x - 1.0;
        return 0.25 * u * u + lambda * x * x;
    };
    pot.gradient = [lambda](const VectorXd& w) -> VectorXd {
        const double x = w(0);
        VectorXd g(1);
        g(0) = x * (x * x - 1.0) + 2.0 * lambda * x;
        return g;
    };
    pot.laplacian = [lambda](const VectorXd& w) {
        const double x = w(0);
        return 3.0 * x * x - 1.0 + 2.0 * lambda;
    };
    pot.minorant_curvature = 2.0 * lambda;
    return pot;
}

Potential Potential::shifted(double constant) const {
    Potential pot = *this;
    auto base = value;
    pot.value = [base, constant](const VectorXd& w) { return base(w) + constant; };
    pot.minorant_offset = minorant_offset + constant;
    return pot;
}

double Potential::v_s(const VectorXd& w, double s) const {
    return gradient(w).squaredNorm() / s - laplacian(w);
}

void GibbsLab::validate() const {
    if (potential.dim < 1 || potential.dim > 2) {
        throw InvalidArgument("Gibbs lab supports 1 or 2 parameters");
    }
    if (grid_n < 64 || grid_n % 2 != 0) {
        throw InvalidArgument("grid_n must be even and >= 64");
    }
    if (!(box_radius > 0.0) || !(temp_s > 0.0)) {
        throw InvalidArgument("box_radius and temp_s must be > 0");
    }
    if (!potential.value || !potential.gradient || !potential.laplacian) {
        throw InvalidArgument("potential is missing an oracle");
    }
}

double auto_box_radius(const Potential& potential, double temp_s, double tail_tol, int grid_n) {
    if (!(potential.minorant_curvature > 0.0)) {
        throw InvalidArgument("auto_box_radius: potential has no confining quadratic minorant");
    }
    double radius = 4.0 * std::sqrt(temp_s / potential.minorant_curvature);
    for (int attempt = 0; attempt < 20; ++attempt, radius *= 1.25) {
        GibbsLab lab{potential, radius, grid_n, temp_s};
        const double log_z = log_partition(evaluate(lab, grid_n), temp_s);
        const double log_tail = log_tail_bound(potential, radius, temp_s);
        if (log_tail - log_z <= std::log(tail_tol)) {
            return radius;
        }
    }
    throw NumericalError("auto_box_radius: no box up to the search limit contains the mass");
}

PartitionResult partition_function(const GibbsLab& lab) {
    lab.validate();
    const Field coarse = evaluate(lab, lab.grid_n);
    const Field fine = evaluate(lab, 2 * lab.grid_n);
    PartitionResult r;
    r.log_z = log_partition(coarse, lab.temp_s);
    const double log_fine = log_partition(fine, lab.temp_s);
    r.z = std::exp(r.log_z);
    r.richardson_rel_error = std::abs(std::expm1(r.log_z - log_fine));
    check_tail(lab, r.log_z, &r.tail_bound_rel);
    if (!(r.richardson_rel_error <= kRichardsonTol)) {
        throw NumericalError("partition function: grid_n and 2 grid_n disagree by " +
                             std::to_string(r.richardson_rel_error));
    }
    return r;
}

double c_constant(const GibbsLab& lab, double global_min) {
    const Quadrature q = prepare(lab);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.mu.size(); ++i) {
        const double e = q.field.f[i] - global_min;
        acc += q.field.grid.weight(static_cast<Index>(i)) * q.mu[i] * e * e;
    }
    return std::sqrt(acc / q.mass);
}

MinScan global_min_scan(const GibbsLab& lab) {
    lab.validate();
    const Field field = evaluate(lab, lab.grid_n);
    const auto best = static_cast<Index>(
        std::min_element(field.f.begin(), field.f.end()) - field.f.begin());
    const Potential& pot = lab.potential;
    VectorXd w = field.grid.point(best);
    double fw = pot.value(w);
    double step = 1.0;
    for (int iter = 0; iter < 200000; ++iter) {
        const VectorXd g = pot.gradient(w);
        const double gn2 = g.squaredNorm();
        if (std::sqrt(gn2) <= 1e-10) {
            break;
        }
        step *= 2.0;
        bool moved = false;
        while (step > 1e-20) {
            const VectorXd trial = w - step * g;
            const double ft = pot.value(trial);
            if (ft <= fw - 0.5 * step * gn2) {
                w = trial;
                fw = ft;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            break;
        }
    }
    // canonical representative under w -> -w
    Index first = 0;
    while (first < w.size() && w(first) == 0.0) {
        ++first;
    }
    if (first < w.size() && w(first) < 0.0) {
        const VectorXd flipped = -w;
        const double ff = pot.value(flipped);
        if (ff <= fw + 1e-12 * (1.0 + std::abs(fw))) {
            w = flipped;
            fw = std::min(fw, ff);
        }
    }
    return MinScan{fw, w};
}

double inf_v(const GibbsLab& lab) {
    lab.validate();
    const Grid grid(lab.potential.dim, lab.grid_n, lab.box_radius);
    double best = std::numeric_limits<double>::infinity();
    for (Index idx = 0; idx < grid.count(); ++idx) {
        best = std::min(best, lab.potential.v_s(grid.point(idx), lab.temp_s));
    }
    return best;
}

double epsilon_r(const GibbsLab& lab, double r) {
    lab.validate();
    if (!(r >= 0.0)) {
        throw InvalidArgument("epsilon_r: radius must be >= 0");
    }
    const Grid grid(lab.potential.dim, lab.grid_n, lab.box_radius);
    double best = std::numeric_limits<double>::infinity();
    for (Index idx = 0; idx < grid.count(); ++idx) {
        const VectorXd w = grid.point(idx);
        if (w.norm() >= r) {
            best = std::min(best, lab.potential.v_s(w, lab.temp_s));
        }
    }
    if (r <= lab.box_radius) {
        if (lab.potential.dim == 1) {
            for (double sign : {-1.0, 1.0}) {
                VectorXd w(1);
                w(0) = sign * r;
                best = std::min(best, lab.potential.v_s(w, lab.temp_s));
            }
        } else {
            const int angles = 8 * lab.grid_n;
            for (int k = 0; k < angles; ++k) {
                const double th = 2.0 * std::numbers::pi * k / angles;
                VectorXd w(2);
                w << r * std::cos(th), r * std::sin(th);
                best = std::min(best, lab.potential.v_s(w, lab.temp_s));
            }
        }
    }
    if (!std::isfinite(best)) {
        throw InvalidArgument("epsilon_r: no grid point lies outside radius r");
    }
    if (!(best > 0.0)) {
        throw InvalidArgument("epsilon_r: inf V_s outside r is " + std::to_string(best) +
                              " <= 0 (r is inside R_0,s)");
    }
    return 1.0 / best;
}

double spectral_gap_at(const GibbsLab& lab, int grid_n, std::optional<double> ball_radius) {
    lab.validate();
    if (grid_n < 4 || grid_n % 2 != 0) {
        throw InvalidArgument("spectral_gap_at: grid_n must be even and >= 4");
    }
    return smallest_nonzero_eigenvalue(build_generator(lab, grid_n, ball_radius));
}

double spectral_gap(const GibbsLab& lab) {
    const double fine = spectral_gap_at(lab, lab.grid_n);
    int half = lab.grid_n / 2;
    half += half % 2;
    const double coarse = spectral_gap_at(lab, half);
    if (std::abs(fine - coarse) > kRefinementTol * std::abs(fine)) {
        throw NumericalError("spectral gap unstable under grid refinement (" + std::to_string(coarse) +
                             " vs " + std::to_string(fine) + "); increase grid_n");
    }
    return fine;
}

double ball_poincare_constant(const GibbsLab& lab, double r) {
    return 1.0 / (2.0 * spectral_gap_at(lab, lab.grid_n, r));
}

std::vector<TestFunction> default_test_functions(int dim) {
    std::vector<TestFunction> out;
    out.push_back({"constant", [](const VectorXd&) { return 1.0; },
                   [dim](const VectorXd&) -> VectorXd { return VectorXd::Zero(dim); }});
    for (int k = 0; k < dim; ++k) {
        const std::string axis = std::to_string(k);
        out.push_back({"linear_" + axis, [k](const VectorXd& w) { return w(k); },
                       [k, dim](const VectorXd&) -> VectorXd {
                           VectorXd g = VectorXd::Zero(dim);
                           g(k) = 1.0;
                           return g;
                       }});
        out.push_back({"sin_" + axis, [k](const VectorXd& w) { return std::sin(w(k)); },
                       [k, dim](const VectorXd& w) -> VectorXd {
                           VectorXd g = VectorXd::Zero(dim);
                           g(k) = std::cos(w(k));
                           return g;
                       }});
        out.push_back({"cos_" + axis, [k](const VectorXd& w) { return std::cos(2.0 * w(k)); },
                       [k, dim](const VectorXd& w) -> VectorXd {
                           VectorXd g = VectorXd::Zero(dim);
                           g(k) = -2.0 * std::sin(2.0 * w(k));
                           return g;
                       }});
    }
    out.push_back({"square", [](const VectorXd& w) { return w.squaredNorm(); },
                   [](const VectorXd& w) -> VectorXd { return 2.0 * w; }});
    return out;
}

PoincareReport poincare_check(const GibbsLab& lab, const std::vector<TestFunction>& tests) {
    const Quadrature q = prepare(lab);
    const Generator gen = build_generator(lab, lab.grid_n, std::nullopt);
    PoincareReport report;
    report.gap = smallest_nonzero_eigenvalue(gen);
    const double s = lab.temp_s;
    const double radius = lab.box_radius;
    const Grid& grid = q.field.grid;
    const int dim = lab.potential.dim;

    auto tapered = [&](const TestFunction& tf, const VectorXd& w, VectorXd* grad) {
        double tau = 1.0;
        VectorXd dtau(dim);
        std::vector<double> factors(static_cast<std::size_t>(dim));
        for (int k = 0; k < dim; ++k) {
            factors[static_cast<std::size_t>(k)] = taper_1d(w(k) / radius);
            tau *= factors[static_cast<std::size_t>(k)];
        }
        const double hv = tf.h(w);
        if (grad != nullptr) {
            for (int k = 0; k < dim; ++k) {
                double prod = taper_1d_deriv(w(k) / radius) / radius;
                for (int l = 0; l < dim; ++l) {
                    if (l != k) {
                        prod *= factors[static_cast<std::size_t>(l)];
                    }
                }
                dtau(k) = prod;
            }
            *grad = tau * tf.grad(w) + hv * dtau;
        }
        return hv * tau;
    };

    for (const auto& tf : tests) {
        PoincareEntry e;
        e.name = tf.name;
        std::vector<double> values(static_cast<std::size_t>(grid.count()));
        double m1 = 0.0, m2 = 0.0, grad2 = 0.0;
        for (Index idx = 0; idx < grid.count(); ++idx) {
            VectorXd g;
            const double hv = tapered(tf, grid.point(idx), &g);
            values[static_cast<std::size_t>(idx)] = hv;
            const double wmu = grid.weight(idx) * q.mu[static_cast<std::size_t>(idx)] / q.mass;
            m1 += wmu * hv;
            m2 += wmu * hv * hv;
            grad2 += wmu * g.squaredNorm();
        }
        e.variance = std::max(0.0, m2 - m1 * m1);
        double dir = 0.0;
        for (const auto& face : gen.faces) {
            const auto a = static_cast<std::size_t>(face.a);
            const auto b = static_cast<std::size_t>(face.b);
            const double dh = values[static_cast<std::size_t>(gen.nodes[a])] -
                              values[static_cast<std::size_t>(gen.nodes[b])];
            dir += 0.5 * s * face.kappa * std::sqrt(gen.mu[a] * gen.mu[b]) * dh * dh;
        }
        e.dirichlet = dir / q.mass;
        const double scale = std::max(1e-300, std::abs(m2));
        if (e.variance <= 1e-14 * scale) {
            e.ratio = 0.0;
            e.quadrature_ratio = 0.0;
        } else {
            e.ratio = e.variance * report.gap / e.dirichlet;
            e.quadrature_ratio = e.variance * 2.0 * report.gap / (s * grad2);
        }
        if (e.ratio > 1.0 + 1e-3) {
            report.all_ok = false;
        }
        report.entries.push_back(e);
    }
    return report;
}

double lambda_s_formula(const GibbsLab& lab, double r, double c_r) {
    const double eps = epsilon_r(lab, r);
    const double iv = inf_v(lab);
    const double s = lab.temp_s;
    return (1.0 + 3.0 * s * iv * eps) / (2.0 * (c_r + 3.0 * eps));
}

LabReport run_lab(const GibbsLab& lab, double r) {
    LabReport rep;
    const PartitionResult z = partition_function(lab);
    rep.z_s = z.z;
    rep.log_z_s = z.log_z;
    const MinScan mn = global_min_scan(lab);
    rep.global_min = mn.value;
    rep.argmin.assign(mn.argmin.data(), mn.argmin.data() + mn.argmin.size());
    rep.c_constant = c_constant(lab, mn.value);
    rep.inf_v = inf_v(lab);
    rep.spectral_gap = spectral_gap(lab);
    rep.r = r;
    rep.grid_n = lab.grid_n;
    rep.box = lab.box_radius;
    rep.temp_s = lab.temp_s;
    try {
        rep.epsilon_r = epsilon_r(lab, r);
    } catch (const InvalidArgument& e) {
        rep.note = e.what();
        return rep;
    }
    rep.ball_constant = ball_poincare_constant(lab, r);
    rep.lambda_s_formula = (1.0 + 3.0 * lab.temp_s * rep.inf_v * *rep.epsilon_r) /
                           (2.0 * (*rep.ball_constant + 3.0 * *rep.epsilon_r));
    return rep;
}

nlohmann::json to_json(const LabReport& r) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["z_s"] = r.z_s;
    j["log_z_s"] = r.log_z_s;
    j["c_constant"] = r.c_constant;
    j["global_min"] = r.global_min;
    j["argmin"] = r.argmin;
    j["r"] = r.r;
    j["epsilon_r"] = opt(r.epsilon_r);
    j["inf_v"] = r.inf_v;
    j["spectral_gap"] = r.spectral_gap;
    j["ball_poincare_constant"] = opt(r.ball_constant);
    j["lambda_s_formula"] = opt(r.lambda_s_formula);
    j["grid_n"] = r.grid_n;
    j["box"] = r.box;
    j["temp_s"] = r.temp_s;
    if (!r.note.empty()) {
        j["note"] = r.note;
    }
    return j;
}

std::pair<std::vector<double>, std::vector<double>> density_1d(const GibbsLab& lab) {
    if (lab.potential.dim != 1) {
        throw InvalidArgument("density_1d needs a one-parameter lab");
    }
    const Quadrature q = prepare(lab);
    std::vector<double> xs(q.mu.size());
    std::vector<double> ps(q.mu.size());
    for (std::size_t i = 0; i < q.mu.size(); ++i) {
        xs[i] = q.field.grid.coord(static_cast<Index>(i));
        ps[i] = q.mu[i] / q.mass;
    }
    return {xs, ps};
}

}  // namespace villani
