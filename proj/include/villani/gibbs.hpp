#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "villani/net_loss.hpp"

namespace villani {

/// A smooth potential on R^k (k <= 2) with the oracles the Gibbs lab needs.
/// The minorant f(w) >= minorant_offset + (minorant_curvature / 2) |w|^2 bounds
/// the Gibbs mass that falls outside the quadrature box.
struct Potential {
    int dim = 1;
    std::function<double(const VectorXd&)> value;
    std::function<VectorXd(const VectorXd&)> gradient;
    std::function<double(const VectorXd&)> laplacian;
    double minorant_curvature = 0.0;
    double minorant_offset = 0.0;

    /// Risk of a net with fixed outer weights, as a function of the p*d entries
    /// of W in row-major order. Requires p*d <= 2 and lambda > 0.
    static Potential from_loss(const LossSpec& spec, const VectorXd& outer);

    /// (lambda / 2) |w|^2
    static Potential quadratic(double lambda, int dim);

    /// (w^2 - 1)^2 / 4 + lambda w^2 in one dimension.
    static Potential double_well(double lambda);

    Potential shifted(double constant) const;

    /// |grad f|^2 / s - Laplacian f
    double v_s(const VectorXd& w, double s) const;
};

/// Gibbs measure mu_s ~ exp(-2 f / s) restricted to the box [-R, R]^k, sampled
/// on a uniform grid with grid_n intervals (grid_n + 1 nodes) per axis.
struct GibbsLab {
    Potential potential;
    double box_radius = 4.0;
    int grid_n = 128;
    double temp_s = 1.0;

    /// grid_n >= 64 and even, radius and temperature positive, dim in {1, 2}.
    void validate() const;
};

/// Gaussian-minorant scale grown geometrically (x1.25) until the outside
/// mass is below tail_tol of Z_s.
double auto_box_radius(const Potential& potential, double temp_s, double tail_tol = 1e-8,
                       int grid_n = 128);

struct PartitionResult {
    double z = 0.0;
    double log_z = 0.0;
    double richardson_rel_error = 0.0;
    double tail_bound_rel = 0.0;  ///< analytic outside-box mass / Z
};

/// Trapezoid quadrature of exp(-2 f / s) over the box, checked against the
/// 2 grid_n grid. Throws NumericalError if the tail-mass bound exceeds 1e-8 of Z
/// or the two grids disagree by more than 1e-6.
PartitionResult partition_function(const GibbsLab& lab);

/// ( E_mu[(f - global_min)^2] )^{1/2}
double c_constant(const GibbsLab& lab, double global_min);

struct MinScan {
    double value = 0.0;
    VectorXd argmin;
};

/// Grid scan followed by backtracking gradient descent until |grad| <= 1e-10.
/// When -w is an equally good minimizer, the representative whose first
/// nonzero coordinate is positive is returned.
MinScan global_min_scan(const GibbsLab& lab);

/// Grid infimum of V_s over the whole box.
double inf_v(const GibbsLab& lab);

/// 1 / inf{ V_s(w) : |w| >= r } over grid nodes plus points on the sphere |w| = r.
/// Throws InvalidArgument if that infimum is not positive.
double epsilon_r(const GibbsLab& lab, double r);

/// Smallest nonzero eigenvalue of -(s/2 Laplacian - grad f . grad) discretized on
/// the grid (reflecting boundary). `ball_radius` restricts to nodes with |w| <= r.
double spectral_gap_at(const GibbsLab& lab, int grid_n, std::optional<double> ball_radius = std::nullopt);

/// spectral_gap_at(lab.grid_n), rejected with NumericalError when the value on
/// the grid_n / 2 grid differs by more than 5%.
double spectral_gap(const GibbsLab& lab);

/// C(R) with Var_{mu_R}[h] <= s C(R) E_{mu_R}|grad h|^2, i.e. 1 / (2 gap_R).
double ball_poincare_constant(const GibbsLab& lab, double r);

struct TestFunction {
    std::string name;
    std::function<double(const VectorXd&)> h;
    std::function<VectorXd(const VectorXd&)> grad;
};

/// constant, each coordinate, sin, cos and a centred square, per coordinate.
std::vector<TestFunction> default_test_functions(int dim);

struct PoincareEntry {
    std::string name;
    double variance = 0.0;
    double dirichlet = 0.0;         ///< grid Dirichlet form, approximates (s/2) E|grad h|^2
    double ratio = 0.0;             ///< Var gap / dirichlet; 0 for constants
    double quadrature_ratio = 0.0;  ///< Var / ((s / 2 gap) E|grad h|^2) with analytic gradients
};

struct PoincareReport {
    double gap = 0.0;
    std::vector<PoincareEntry> entries;
    bool all_ok = true;  ///< every ratio <= 1 + 1e-3
};

/// Both sides of Var[h] <= (s / 2 lambda_s) E|grad h|^2 with lambda_s the grid
/// spectral gap. Test functions are tapered to zero near the box faces.
PoincareReport poincare_check(const GibbsLab& lab, const std::vector<TestFunction>& tests);

/// (1 + 3 s inf V_s eps(r)) / (2 (c_r + 3 eps(r)))
double lambda_s_formula(const GibbsLab& lab, double r, double c_r);

struct LabReport {
    double z_s = 0.0;
    double log_z_s = 0.0;
    double c_constant = 0.0;
    double global_min = 0.0;
    std::vector<double> argmin;
    double r = 0.0;
    std::optional<double> epsilon_r;
    double inf_v = 0.0;
    double spectral_gap = 0.0;
    std::optional<double> ball_constant;
    std::optional<double> lambda_s_formula;
    int grid_n = 0;
    double box = 0.0;
    double temp_s = 0.0;
    std::string note;
};

/// Runs every lab quantity. When eps(r) is undefined (r inside R_{0,s}) the
/// dependent fields are left empty and `note` says why.
LabReport run_lab(const GibbsLab& lab, double r);

nlohmann::json to_json(const LabReport& report);

/// Normalized grid density of mu_s on a 1-D lab: (nodes, density values).
std::pair<std::vector<double>, std::vector<double>> density_1d(const GibbsLab& lab);

}  // namespace villani
