#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "villani/error.hpp"
#include "villani/gibbs.hpp"
#include "villani/sde.hpp"

using namespace villani;
using namespace testing_support;

namespace {

LossSpec one_param_spec(double lambda) {
    MatrixXd x(5, 1);
    x << 0.9, 0.4, -0.3, -0.8, 0.2;
    VectorXd y(5);
    y << 1, 1, -1, -1, -1;
    return LossSpec::create(LabeledDataset::create(x, y), make_activation(ActivationKind::Sigmoid, 1.0), lambda);
}

double golden_section(const std::function<double(double)>& f, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int k = 0; k < 200; ++k) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return f(0.5 * (a + b));
}

}  // namespace

TEST_SUITE("gibbs") {

TEST_CASE("lab validation") {
    GibbsLab lab{Potential::quadratic(1.0, 1), 4.0, 32, 1.0};
    CHECK_THROWS_AS(lab.validate(), InvalidArgument);
    lab.grid_n = 65;
    CHECK_THROWS_AS(lab.validate(), InvalidArgument);
    lab.grid_n = 64;
    CHECK_NOTHROW(lab.validate());
    CHECK_THROWS_AS(Potential::quadratic(0.0, 1), InvalidArgument);
    MatrixXd x(2, 2);
    x << 1, 0, 0, 1;
    const auto wide = LossSpec::create(LabeledDataset::create(x, VectorXd::Ones(2)),
                                       make_activation(ActivationKind::Tanh), 0.1);
    CHECK_THROWS_AS(Potential::from_loss(wide, VectorXd::Ones(2)), InvalidArgument);
    CHECK_THROWS_AS(Potential::from_loss(one_param_spec(0.0), VectorXd::Ones(1)), InvalidArgument);
}

TEST_CASE("partition function of the quadratic") {
    const GibbsLab lab{Potential::quadratic(1.0, 1), 4.0, 256, 0.5};
    const auto z = partition_function(lab);
    CHECK(std::abs(z.z - std::sqrt(std::numbers::pi / 2.0)) <= 1e-6);
    CHECK(z.richardson_rel_error <= 1e-6);
    CHECK(z.tail_bound_rel <= 1e-8);
    const GibbsLab hot{Potential::quadratic(1.0, 1), 6.0, 256, 1.0};
    CHECK(partition_function(hot).z / z.z == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    const GibbsLab plane{Potential::quadratic(2.0, 2), 3.0, 128, 0.5};
    CHECK(partition_function(plane).z == doctest::Approx(std::numbers::pi * 0.5 / 2.0).epsilon(1e-9));
    const GibbsLab small_box{Potential::quadratic(1.0, 1), 1.0, 256, 0.5};
    CHECK_THROWS_AS(partition_function(small_box), NumericalError);
}

TEST_CASE("partition function of a logistic instance matches a refined quadrature") {
    const auto spec = one_param_spec(0.2);
    const Potential pot = Potential::from_loss(spec, VectorXd::Ones(1));
    const double box = auto_box_radius(pot, 0.5);
    const GibbsLab lab{pot, box, 256, 0.5};
    const auto z = partition_function(lab);
    // composite Simpson on a much finer grid as the independent oracle
    const int m = 200000;
    const double h = 2.0 * box / m;
    double acc = 0.0;
    for (int i = 0; i <= m; ++i) {
        VectorXd w(1);
        w << -box + i * h;
        const double wt = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += wt * std::exp(-2.0 * pot.value(w) / 0.5);
    }
    acc *= h / 3.0;
    CHECK(std::abs(z.z - acc) <= 1e-6 * acc);
}

TEST_CASE("c constant") {
    const GibbsLab lab{Potential::quadratic(1.0, 1), 4.0, 256, 0.5};
    CHECK(c_constant(lab, 0.0) == doctest::Approx(std::sqrt(3.0) * 0.5 / 4.0).epsilon(1e-8));
    const GibbsLab shifted{Potential::quadratic(1.0, 1).shifted(3.7), 4.0, 256, 0.5};
    CHECK(c_constant(shifted, 3.7) == doctest::Approx(c_constant(lab, 0.0)).epsilon(1e-10));
    const Potential pot = Potential::from_loss(one_param_spec(0.2), VectorXd::Ones(1));
    double prev = std::numeric_limits<double>::infinity();
    for (double s : {1.0, 0.5, 0.25, 0.125}) {
        const GibbsLab l{pot, auto_box_radius(pot, s), 512, s};
        const double c = c_constant(l, global_min_scan(l).value);
        CHECK(c < prev);
        prev = c;
    }
}

TEST_CASE("global minimum scan") {
    const GibbsLab lab{Potential::quadratic(1.0, 2), 4.0, 64, 1.0};
    const MinScan q = global_min_scan(lab);
    CHECK(q.value == 0.0);
    CHECK(q.argmin.norm() == 0.0);
    // even potential with two minimizers: the scan returns the positive one
    const GibbsLab two{Potential::double_well(0.01), 2.5, 400, 1.0};
    const MinScan s = global_min_scan(two);
    CHECK(s.argmin(0) > 0.0);
    VectorXd neg = -s.argmin;
    CHECK(two.potential.value(neg) == doctest::Approx(s.value).epsilon(1e-12));
    // independent golden-section oracle on a one-parameter instance
    const Potential pot = Potential::from_loss(one_param_spec(0.15), VectorXd::Ones(1));
    const GibbsLab one{pot, 20.0, 400, 1.0};
    const double oracle = golden_section(
        [&](double w) {
            VectorXd v(1);
            v << w;
            return pot.value(v);
        },
        -20.0, 20.0);
    CHECK(std::abs(global_min_scan(one).value - oracle) <= 1e-8);
}

TEST_CASE("epsilon and inf V") {
    const GibbsLab lab{Potential::quadratic(1.0, 1), 4.0, 256, 1.0};
    CHECK(epsilon_r(lab, 2.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(epsilon_r(lab, 0.5), InvalidArgument);
    CHECK(inf_v(lab) == -1.0);
    const Potential pot = Potential::from_loss(one_param_spec(0.3), VectorXd::Ones(1));
    const GibbsLab l{pot, 16.0, 512, 0.5};
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {2.0, 4.0, 8.0}) {
        const double e = epsilon_r(l, r);
        CHECK(e <= prev);
        prev = e;
    }
}

TEST_CASE("spectral gap of the OU generator") {
    for (double s : {0.25, 0.5, 2.0}) {
        const Potential pot = Potential::quadratic(1.0, 1);
        const GibbsLab lab{pot, auto_box_radius(pot, s), 512, s};
        CHECK(std::abs(spectral_gap(lab) - 1.0) <= 0.01);
    }
    const GibbsLab plane{Potential::quadratic(1.0, 2), 3.5, 128, 0.5};
    CHECK(std::abs(spectral_gap(plane) - 1.0) <= 0.01);
    const GibbsLab shifted{Potential::quadratic(1.0, 1).shifted(-5.0), 3.5, 256, 0.5};
    const GibbsLab base{Potential::quadratic(1.0, 1), 3.5, 256, 0.5};
    CHECK(spectral_gap(shifted) == doctest::Approx(spectral_gap(base)).epsilon(1e-9));
}

TEST_CASE("double-well gap shrinks with temperature") {
    const Potential pot = Potential::double_well(0.01);
    double prev = std::numeric_limits<double>::infinity();
    for (double s : {0.8, 0.4, 0.2}) {
        const GibbsLab lab{pot, 2.6, 512, s};
        const double gap = spectral_gap(lab);
        CHECK(gap < prev);
        CHECK(std::abs(spectral_gap_at(lab, 1024) - gap) <= 0.01 * gap);
        prev = gap;
    }
}

TEST_CASE("Poincare check") {
    const GibbsLab lab{Potential::quadratic(1.0, 1), 3.5, 512, 0.5};
    const PoincareReport rep = poincare_check(lab, default_test_functions(1));
    CHECK(rep.all_ok);
    for (const auto& e : rep.entries) {
        CHECK(e.ratio <= 1.0 + 1e-3);
        if (e.name == "linear_0") {
            CHECK(e.ratio >= 0.95);
            CHECK(e.quadrature_ratio >= 0.95);
        }
        if (e.name == "constant") {
            CHECK(e.variance <= 1e-6);
        }
    }
    const Potential pot = Potential::from_loss(one_param_spec(0.2), VectorXd::Ones(1));
    const GibbsLab logistic{pot, auto_box_radius(pot, 0.5), 512, 0.5};
    const PoincareReport r2 = poincare_check(logistic, default_test_functions(1));
    CHECK(r2.all_ok);
    const GibbsLab plane{Potential::quadratic(1.0, 2), 3.5, 128, 0.5};
    CHECK(poincare_check(plane, default_test_functions(2)).all_ok);
}

TEST_CASE("lambda_s formula") {
    const GibbsLab lab{Potential::quadratic(1.0, 1), 6.0, 256, 1.0};
    const double c_r = ball_poincare_constant(lab, 2.0);
    CHECK(c_r > 0.0);
    CHECK(lambda_s_formula(lab, 2.0, c_r) == doctest::Approx(0.0).epsilon(1e-12));
    // a curvature-dominated case with a positive numerator
    const GibbsLab steep{Potential::quadratic(10.0, 1), 1.5, 256, 1.0};
    const double formula = lambda_s_formula(steep, 1.0, ball_poincare_constant(steep, 1.0));
    CHECK(formula > 0.0);
    // decreasing in epsilon when inf V <= 0: larger r shrinks eps and raises the value
    const GibbsLab flat{Potential::quadratic(1.0, 1), 6.0, 256, 1.0};
    CHECK(lambda_s_formula(flat, 4.0, 0.5) > lambda_s_formula(flat, 2.0, 0.5));
    const LabReport rep = run_lab(lab, 2.0);
    CHECK(rep.epsilon_r.has_value());
    CHECK(*rep.lambda_s_formula == doctest::Approx(0.0).epsilon(1e-12));
    const auto j = to_json(rep);
    for (const char* key : {"z_s", "c_constant", "global_min", "epsilon_r", "spectral_gap", "lambda_s_formula",
                            "grid_n", "box"}) {
        CHECK(j.contains(key));
    }
    const LabReport inside = run_lab(lab, 0.5);
    CHECK_FALSE(inside.epsilon_r.has_value());
    CHECK_FALSE(inside.note.empty());
}

TEST_CASE("SDE histogram matches the grid density") {
    const double s = 0.5;
    const auto spec = one_param_spec(0.3);
    const VectorXd outer = VectorXd::Ones(1);
    const Potential pot = Potential::from_loss(spec, outer);
    const GibbsLab lab{pot, auto_box_radius(pot, s), 256, s};
    const double gap = spectral_gap(lab);
    SdeConfig cfg;
    cfg.temp_s = s;
    cfg.dt = 1e-2;
    cfg.horizon_T = 8.0 / gap;
    cfg.ensemble_m = 10000;
    cfg.record_every = 1000000;
    cfg.seed = 42;
    cfg.init = InitSpec::at(MatrixXd::Zero(1, 1));
    const auto res = run_ensemble(spec, outer, cfg);
    const auto [xs, ps] = density_1d(lab);
    // bins of width 8 grid cells; TV = half the L1 distance of bin masses
    const double h = xs[1] - xs[0];
    const std::size_t per_bin = 8;
    const std::size_t bins = (xs.size() - 1) / per_bin;
    std::vector<double> grid_mass(bins, 0.0), emp(bins, 0.0);
    for (std::size_t b = 0; b < bins; ++b) {
        for (std::size_t i = b * per_bin; i < (b + 1) * per_bin; ++i) {
            grid_mass[b] += 0.5 * h * (ps[i] + ps[i + 1]);
        }
    }
    double outside = 0.0;
    for (const auto& w : res.final_inner) {
        const double v = w(0, 0);
        const auto b = static_cast<long>(std::floor((v - xs.front()) / (h * per_bin)));
        if (b >= 0 && b < static_cast<long>(bins)) {
            emp[static_cast<std::size_t>(b)] += 1.0 / res.final_inner.size();
        } else {
            outside += 1.0 / res.final_inner.size();
        }
    }
    double tv = outside;
    for (std::size_t b = 0; b < bins; ++b) {
        tv += std::abs(grid_mass[b] - emp[b]);
    }
    CHECK(0.5 * tv <= 0.05);
}

TEST_CASE("SDE mean coordinate relaxes at the spectral gap") {
    // the risk itself projects on the second mode; the coordinate mean sees the gap
    const double s = 0.5;
    const auto spec = one_param_spec(0.3);
    const VectorXd outer = VectorXd::Ones(1);
    const Potential pot = Potential::from_loss(spec, outer);
    const GibbsLab lab{pot, auto_box_radius(pot, s), 512, s};
    const double gap = spectral_gap(lab);
    const auto [xs, ps] = density_1d(lab);
    double mean_w = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        mean_w += 0.25 * (xs[i + 1] - xs[i]) * (ps[i] + ps[i + 1]) * (xs[i] + xs[i + 1]);
    }
    const int members = 3000;
    const double dt = 5e-3;
    const auto steps = static_cast<int>(std::ceil(3.0 / gap / dt));
    std::vector<NetState> ens(members, NetState::create(outer, MatrixXd::Constant(1, 1, 4.0)));
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    std::vector<SeriesPoint> series;
    for (int k = 0; k <= steps; ++k) {
        if (k % 20 == 0) {
            double m = 0.0;
            for (const auto& e : ens) {
                m += e.inner(0, 0) / members;
            }
            series.push_back({k * dt, m, 0.0, members});
        }
        for (auto& e : ens) {
            e = em_step(spec, e, s, dt, MatrixXd::Constant(1, 1, n01(rng)));
        }
    }
    RateFitOptions opts;
    opts.upper_fraction = 0.6;
    opts.lower_fraction = 0.03;
    const RateFit fit = fit_rate(series, mean_w, opts);
    CHECK(std::abs(fit.lambda_hat - gap) <= 0.15 * gap);
}

}  // TEST_SUITE
