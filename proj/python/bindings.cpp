#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "villani/bounds.hpp"
#include "villani/commands.hpp"
#include "villani/config.hpp"
#include "villani/data.hpp"
#include "villani/error.hpp"
#include "villani/gibbs.hpp"
#include "villani/net_loss.hpp"

namespace py = pybind11;
using namespace villani;

namespace {

LossSpec make_spec(const MatrixXd& x, const VectorXd& y, const std::string& activation, double lambda) {
    return LossSpec::create(LabeledDataset::create(x, y), parse_activation(activation), lambda);
}

LambdaCVariant variant_of(const std::string& name) {
    if (name == "lemma") {
        return LambdaCVariant::Lemma;
    }
    if (name == "proof") {
        return LambdaCVariant::Proof;
    }
    throw InvalidArgument("variant must be \"lemma\" or \"proof\"");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Compiled core of villani_net";

    auto base = py::register_exception<Error>(m, "VillaniError");
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", base.ptr());
    py::register_exception<UnboundedActivation>(m, "UnboundedActivation", base.ptr());
    py::register_exception<Divergence>(m, "Divergence", base.ptr());
    py::register_exception<IdxFormatError>(m, "IdxFormatError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    m.def(
        "activation_constants",
        [](const std::string& name) {
            const ActivationProfile a = parse_activation(name);
            py::dict d;
            d["name"] = a.name();
            d["beta"] = a.beta;
            d["b_sigma"] = a.b_sigma;
            d["lipschitz_L"] = a.lipschitz_L;
            d["m_d"] = a.m_d;
            d["m_d_prime"] = a.m_d_prime;
            d["c0"] = a.c0;
            return d;
        },
        py::arg("name"));

    m.def(
        "lambda_c",
        [](const std::string& activation, double a_norm, double b_x, const std::string& variant) {
            return lambda_c(parse_activation(activation), a_norm, b_x, variant_of(variant));
        },
        py::arg("activation"), py::arg("a_norm"), py::arg("b_x"), py::arg("variant") = "lemma");

    m.def(
        "risk",
        [](const MatrixXd& x, const VectorXd& y, const VectorXd& a, const MatrixXd& w, const std::string& act,
           double lambda) { return risk(make_spec(x, y, act, lambda), NetState::create(a, w)); },
        py::arg("x"), py::arg("y"), py::arg("a"), py::arg("w"), py::arg("activation") = "sigmoid:1", py::arg("lam") = 0.0);

    m.def(
        "full_grad",
        [](const MatrixXd& x, const VectorXd& y, const VectorXd& a, const MatrixXd& w, const std::string& act,
           double lambda) { return full_grad(make_spec(x, y, act, lambda), NetState::create(a, w)); },
        py::arg("x"), py::arg("y"), py::arg("a"), py::arg("w"), py::arg("activation") = "sigmoid:1", py::arg("lam") = 0.0);

    m.def(
        "exact_laplacian",
        [](const MatrixXd& x, const VectorXd& y, const VectorXd& a, const MatrixXd& w, const std::string& act,
           double lambda) { return exact_laplacian(make_spec(x, y, act, lambda), NetState::create(a, w)); },
        py::arg("x"), py::arg("y"), py::arg("a"), py::arg("w"), py::arg("activation") = "sigmoid:1", py::arg("lam") = 0.0);

    m.def(
        "glip_bound",
        [](const MatrixXd& x, const VectorXd& y, const VectorXd& a, const std::string& act, double lambda) {
            const LossSpec spec = make_spec(x, y, act, lambda);
            return glip_bound(BoundInputs::from(spec, NetState::create(a, MatrixXd::Zero(a.size(), x.cols()))));
        },
        py::arg("x"), py::arg("y"), py::arg("a"), py::arg("activation") = "sigmoid:1", py::arg("lam") = 0.0);

    m.def(
        "verify_villani_json",
        [](const MatrixXd& x, const VectorXd& y, const VectorXd& a, const MatrixXd& w, const std::string& act,
           double lambda, double s, std::uint64_t seed) {
            VillaniOptions opts;
            opts.seed = seed;
            return to_json(verify_villani(make_spec(x, y, act, lambda), NetState::create(a, w), s, opts)).dump();
        },
        py::arg("x"), py::arg("y"), py::arg("a"), py::arg("w"), py::arg("activation"), py::arg("lam"), py::arg("s"),
        py::arg("seed") = 0);

    m.def(
        "gen_synthetic",
        [](Index n_raw, Index dim_d, double margin, double test_fraction, std::uint64_t seed) {
            SyntheticSpec spec;
            spec.n_raw = n_raw;
            spec.dim_d = dim_d;
            spec.margin = margin;
            spec.test_fraction = test_fraction;
            spec.seed = seed;
            const SyntheticSplit s = gen_synthetic(spec);
            return py::make_tuple(s.train.features, s.train.labels, s.test.features, s.test.labels);
        },
        py::arg("n_raw") = 10000, py::arg("dim_d") = 10, py::arg("margin") = 0.2, py::arg("test_fraction") = 0.2,
        py::arg("seed") = 0);

    m.def(
        "gibbs_quadratic_json",
        [](double lambda, int dim, double temp_s, double box, int grid_n, double r) {
            const GibbsLab lab{Potential::quadratic(lambda, dim), box, grid_n, temp_s};
            return to_json(run_lab(lab, r)).dump();
        },
        py::arg("lam"), py::arg("dim") = 1, py::arg("temp_s") = 1.0, py::arg("box") = 6.0, py::arg("grid_n") = 256,
        py::arg("r") = 1.0);

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_json) {
            const RunConfig cfg = parse_config(command, nlohmann::json::parse(config_json));
            CommandResult res;
            {
                py::gil_scoped_release release;
                res = run_command(cfg);
            }
            return py::make_tuple(res.artifacts, res.messages);
        },
        py::arg("command"), py::arg("config_json"));

    m.def("command_names", &command_names);
}
