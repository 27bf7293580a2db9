#include "villani/commands.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "villani/error.hpp"
#include "villani/gibbs.hpp"
#include "villani/io.hpp"
#include "villani/parallel.hpp"
#include "villani/rng.hpp"
#include "villani/sde.hpp"
#include "villani/sgd.hpp"

namespace villani {

namespace {

using nlohmann::json;

struct Split {
    LabeledDataset train;
    LabeledDataset test;
};

Split load_data(const DataSection& d) {
    if (d.kind == DataSection::Kind::Inline) {
        auto set = LabeledDataset::create(d.features, d.labels);
        return {set, set};
    }
    auto s = gen_synthetic(d.synthetic);
    return {std::move(s.train), std::move(s.test)};
}

std::filesystem::path emit(CommandResult& res, const std::filesystem::path& path, std::string_view text) {
    write_text_file(path, text);
    res.artifacts.push_back(path);
    return path;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::int64_t sgd_steps(const SgdSection& s, Index n, Index batch) {
    return s.steps ? *s.steps : SgdConfig::steps_for_epochs(*s.epochs, n, batch);
}

std::int64_t sgd_record_every(const SgdSection& s, Index n, Index batch) {
    return s.record_every > 0 ? s.record_every : (n + batch - 1) / batch;
}

void collect(CommandResult& res, const std::vector<std::string>& warnings, const std::string& tag) {
    for (const auto& w : warnings) {
        res.messages.push_back("warning [" + tag + "]: " + w);
    }
}

}  // namespace

VectorXd make_outer(const NetSection& net, Index p, std::uint64_t seed) {
    switch (net.outer_init) {
        case NetSection::OuterInit::Explicit:
            if (net.outer.size() != p) {
                throw DimensionMismatch("explicit outer layer has the wrong length");
            }
            return net.outer;
        case NetSection::OuterInit::Uniform:
            return VectorXd::Constant(p, 1.0 / std::sqrt(static_cast<double>(p)));
        case NetSection::OuterInit::NormalizedGaussian:
            break;
    }
    Rng rng(seed);
    MatrixXd a(p, 1);
    fill_normal(a, rng);
    const double norm = a.norm();
    if (norm == 0.0) {
        throw NumericalError("outer layer draw has zero norm");
    }
    return a.col(0) / norm;
}

CommandResult cmd_train(const RunConfig& cfg) {
    CommandResult res;
    const Split data = load_data(*cfg.data);
    const SgdSection& sgd = *cfg.sgd;
    const Index n = data.train.size();
    const Index batch = std::min(sgd.batch, n);
    const std::int64_t steps = sgd_steps(sgd, n, batch);
    const std::size_t nl = cfg.lambdas.size();
    const std::size_t cells = cfg.net.widths.size() * nl;

    struct Cell {
        Index p = 0;
        double lambda = 0.0;
        double final_risk = 0.0;
        double test_accuracy = 0.0;
        Trajectory traj;
    };
    std::vector<Cell> out(cells);
    parallel_for(cells, cfg.threads, [&](std::size_t c) {
        const std::size_t wi = c / nl;
        const std::size_t li = c % nl;
        Cell& cell = out[c];
        cell.p = cfg.net.widths[wi];
        cell.lambda = cfg.lambdas[li];
        const VectorXd outer = make_outer(cfg.net, cell.p, derive_seed(cfg.seed, 1000 + wi));
        const LossSpec spec = LossSpec::create(data.train, cfg.net.activation, cell.lambda);
        SgdConfig sc;
        sc.step_s = sgd.step;
        sc.batch_b = batch;
        sc.num_steps = steps;
        sc.seed = derive_seed(cfg.seed, 2000 + c);
        sc.init = InitSpec::scaled(sgd.init_sigma);
        sc.record_every = sgd_record_every(sgd, n, batch);
        cell.traj = run_sgd(spec, outer, sc);
        cell.final_risk = cell.traj.records.back().risk;
        cell.test_accuracy = accuracy(cfg.net.activation, data.test, cell.traj.final_state);
    });

    std::ostringstream sweep;
    sweep << "p,lambda,final_risk,test_accuracy,steps\n";
    for (std::size_t c = 0; c < cells; ++c) {
        const Cell& cell = out[c];
        sweep << cell.p << ',' << format_number(cell.lambda) << ',' << format_number(cell.final_risk) << ','
              << format_number(cell.test_accuracy) << ',' << steps << '\n';
        const std::string tag = "p" + std::to_string(cell.p) + "_l" + std::to_string(c % nl);
        emit(res, cfg.output_dir / "curves" / ("train_" + tag + ".csv"), trajectory_csv(cell.traj));
        collect(res, cell.traj.warnings, tag);
        res.messages.push_back("p=" + std::to_string(cell.p) + " lambda=" + format_number(cell.lambda) +
                               " test_accuracy=" + format_number(cell.test_accuracy));
    }
    emit(res, cfg.output_dir / "sweep.csv", sweep.str());
    return res;
}

CommandResult cmd_verify(const RunConfig& cfg) {
    CommandResult res;
    const Split data = load_data(*cfg.data);
    const VerifySection& v = *cfg.verify;
    const Index p = cfg.net.widths.front();
    const VectorXd outer = make_outer(cfg.net, p, derive_seed(cfg.seed, 1000));
    const MatrixXd w = init_weights(InitSpec::scaled(v.init_sigma), p, data.train.dim(), derive_seed(cfg.seed, 3000));
    const NetState net = NetState::create(outer, w);
    VillaniOptions opts;
    for (int k = 0; k <= v.max_power; ++k) {
        opts.radius_schedule.push_back(std::ldexp(1.0, k));
    }
    opts.directions = v.directions;
    opts.high_water = v.high_water;
    opts.seed = derive_seed(cfg.seed, 3001);
    opts.variant = v.variant;
    json reports = json::array();
    for (double lambda : cfg.lambdas) {
        const LossSpec spec = LossSpec::create(data.train, cfg.net.activation, lambda);
        const VillaniReport rep = verify_villani(spec, net, v.s, opts);
        reports.push_back(to_json(rep));
        res.messages.push_back("lambda=" + format_number(lambda) +
                               " divergence_verified=" + (rep.divergence_verified ? "true" : "false"));
    }
    emit(res, cfg.output_dir / "verify.json", dump(reports.size() == 1 ? reports[0] : reports));
    return res;
}

CommandResult cmd_sde(const RunConfig& cfg) {
    CommandResult res;
    const Split data = load_data(*cfg.data);
    const SdeSection& s = *cfg.sde;
    const Index p = cfg.net.widths.front();
    const VectorXd outer = make_outer(cfg.net, p, derive_seed(cfg.seed, 1000));
    const LossSpec spec = LossSpec::create(data.train, cfg.net.activation, cfg.lambdas.front());
    SdeConfig sc;
    sc.temp_s = s.temp_s;
    sc.dt = s.dt ? *s.dt : default_dt(spec, NetState::create(outer, MatrixXd::Zero(p, spec.data.dim())));
    sc.horizon_T = s.horizon;
    sc.ensemble_m = s.ensemble;
    sc.seed = derive_seed(cfg.seed, 4000);
    sc.init = s.init_at ? InitSpec::at(*s.init_at) : InitSpec::scaled(s.init_sigma);
    sc.record_every = s.record_every;
    sc.threads = cfg.threads;
    const EnsembleResult ens = run_ensemble(spec, outer, sc);
    emit(res, cfg.output_dir / "series.csv", series_csv(ens.series));
    collect(res, ens.warnings, "sde");

    json j;
    j["lambda"] = spec.lambda;
    j["temp_s"] = sc.temp_s;
    j["dt"] = sc.dt;
    j["horizon"] = sc.horizon_T;
    j["ensemble"] = sc.ensemble_m;
    j["final_mean_risk"] = ens.series.back().mean_risk;
    j["warnings"] = ens.warnings;
    if (s.fit) {
        try {
            const RateFit fit = fit_rate(ens.series, s.plateau);
            j["fit"] = {{"lambda_hat", fit.lambda_hat},
                        {"r2", fit.r2},
                        {"plateau", fit.plateau},
                        {"window_begin", fit.window_begin},
                        {"window_end", fit.window_end}};
            res.messages.push_back("lambda_hat=" + format_number(fit.lambda_hat));
        } catch (const InvalidArgument& e) {
            j["fit"] = nullptr;
            j["fit_error"] = e.what();
            res.messages.push_back(std::string("warning [fit]: ") + e.what());
        }
    }
    emit(res, cfg.output_dir / "sde.json", dump(j));
    return res;
}

CommandResult cmd_gibbs(const RunConfig& cfg) {
    CommandResult res;
    const GibbsSection& g = *cfg.gibbs;
    const double lambda = cfg.lambdas.front();
    Potential pot;
    switch (g.potential) {
        case GibbsSection::Potential::Quadratic:
            pot = Potential::quadratic(lambda, g.dim);
            break;
        case GibbsSection::Potential::DoubleWell:
            pot = Potential::double_well(lambda);
            break;
        case GibbsSection::Potential::Loss: {
            const Split data = load_data(*cfg.data);
            const Index p = cfg.net.widths.front();
            const VectorXd outer = make_outer(cfg.net, p, derive_seed(cfg.seed, 1000));
            pot = Potential::from_loss(LossSpec::create(data.train, cfg.net.activation, lambda), outer);
            break;
        }
    }
    const double box = g.box ? *g.box : auto_box_radius(pot, g.temp_s, 1e-8, g.grid_n);
    const GibbsLab lab{pot, box, g.grid_n, g.temp_s};
    const LabReport rep = run_lab(lab, g.r);
    json j = to_json(rep);
    const PartitionResult z = partition_function(lab);
    j["richardson_rel_error"] = z.richardson_rel_error;
    j["tail_bound_rel"] = z.tail_bound_rel;
    if (g.poincare) {
        const PoincareReport pr = poincare_check(lab, default_test_functions(pot.dim));
        json entries = json::array();
        for (const auto& e : pr.entries) {
            entries.push_back({{"name", e.name},
                               {"variance", e.variance},
                               {"dirichlet", e.dirichlet},
                               {"ratio", e.ratio},
                               {"quadrature_ratio", e.quadrature_ratio}});
        }
        j["poincare"] = {{"gap", pr.gap}, {"all_ok", pr.all_ok}, {"entries", entries}};
    }
    emit(res, cfg.output_dir / "gibbs.json", dump(j));
    if (pot.dim == 1) {
        const auto [xs, ps] = density_1d(lab);
        std::ostringstream os;
        os << "w,density\n";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            os << format_number(xs[i]) << ',' << format_number(ps[i]) << '\n';
        }
        emit(res, cfg.output_dir / "density.csv", os.str());
    }
    res.messages.push_back("z_s=" + format_number(rep.z_s) + " spectral_gap=" + format_number(rep.spectral_gap));
    if (!rep.note.empty()) {
        res.messages.push_back("note: " + rep.note);
    }
    return res;
}

CommandResult cmd_gendata(const RunConfig& cfg) {
    CommandResult res;
    const SyntheticSpec& spec = cfg.data->synthetic;
    const SyntheticSplit split = gen_synthetic(spec);
    emit(res, cfg.output_dir / "train.csv", dataset_csv(split.train));
    emit(res, cfg.output_dir / "test.csv", dataset_csv(split.test));
    json j{{"n_raw", spec.n_raw},
           {"dim_d", spec.dim_d},
           {"margin", spec.margin},
           {"test_fraction", spec.test_fraction},
           {"seed", spec.seed},
           {"survivors", split.survivors},
           {"n_train", split.train.size()},
           {"n_test", split.test.size()}};
    emit(res, cfg.output_dir / "data.json", dump(j));
    res.messages.push_back("survivors=" + std::to_string(split.survivors));
    return res;
}

CommandResult cmd_mnist(const RunConfig& cfg) {
    CommandResult res;
    const MnistSection& m = *cfg.mnist;
    const IdxFile train_images = load_idx(m.dir / "train-images-idx3-ubyte");
    const IdxFile train_labels = load_idx(m.dir / "train-labels-idx1-ubyte");
    const IdxFile test_images = load_idx(m.dir / "t10k-images-idx3-ubyte");
    const IdxFile test_labels = load_idx(m.dir / "t10k-labels-idx1-ubyte");
    const SgdSection& sgd = *cfg.sgd;

    json runs = json::array();
    std::ostringstream table;
    table << "digit_a,digit_b,p,lambda,final_risk,train_accuracy,test_accuracy,steps\n";
    std::size_t run_index = 0;
    for (const auto& [a, b] : m.pairs) {
        LabeledDataset train = binary_pair(train_images, train_labels, a, b, PixelScale::Unit);
        LabeledDataset test = binary_pair(test_images, test_labels, a, b, PixelScale::Unit);
        if (m.scale == PixelScale::NormalizeByMaxNorm) {
            // both splits share the training set's scale factor
            const double factor = train.b_x;
            train = LabeledDataset::create(train.features / factor, train.labels);
            test = LabeledDataset::create(test.features / factor, test.labels);
        }
        const Index n = train.size();
        const Index batch = std::min(sgd.batch, n);
        const std::int64_t steps = sgd_steps(sgd, n, batch);
        for (std::size_t wi = 0; wi < cfg.net.widths.size(); ++wi) {
            const Index p = cfg.net.widths[wi];
            const VectorXd outer = make_outer(cfg.net, p, derive_seed(cfg.seed, 1000 + wi));
            for (double lambda : cfg.lambdas) {
                const LossSpec spec = LossSpec::create(train, cfg.net.activation, lambda);
                SgdConfig sc;
                sc.step_s = sgd.step;
                sc.batch_b = batch;
                sc.num_steps = steps;
                sc.seed = derive_seed(cfg.seed, 5000 + run_index);
                sc.init = InitSpec::scaled(sgd.init_sigma);
                sc.record_every = sgd_record_every(sgd, n, batch);
                const Trajectory traj = run_sgd(spec, outer, sc);
                const double train_acc = accuracy(spec.activation, train, traj.final_state);
                const double test_acc = accuracy(spec.activation, test, traj.final_state);
                const std::string tag = std::to_string(a) + "_" + std::to_string(b) + "_p" + std::to_string(p) +
                                        "_r" + std::to_string(run_index);
                emit(res, cfg.output_dir / "curves" / ("mnist_" + tag + ".csv"), trajectory_csv(traj));
                collect(res, traj.warnings, tag);
                runs.push_back({{"pair", {a, b}},
                                {"p", p},
                                {"lambda", lambda},
                                {"step", sgd.step},
                                {"batch", batch},
                                {"steps", steps},
                                {"n_train", n},
                                {"n_test", test.size()},
                                {"b_x", train.b_x},
                                {"final_risk", traj.records.back().risk},
                                {"train_accuracy", train_acc},
                                {"accuracy", test_acc}});
                table << a << ',' << b << ',' << p << ',' << format_number(lambda) << ','
                      << format_number(traj.records.back().risk) << ',' << format_number(train_acc) << ','
                      << format_number(test_acc) << ',' << steps << '\n';
                res.messages.push_back("pair (" + std::to_string(a) + "," + std::to_string(b) +
                                       ") p=" + std::to_string(p) + " lambda=" + format_number(lambda) +
                                       " test_accuracy=" + format_number(test_acc));
                ++run_index;
            }
        }
    }
    emit(res, cfg.output_dir / "mnist.csv", table.str());
    emit(res, cfg.output_dir / "mnist.json", dump(json{{"runs", runs}}));
    return res;
}

CommandResult run_command(const RunConfig& cfg) {
    if (cfg.command == "train") {
        return cmd_train(cfg);
    }
    if (cfg.command == "verify") {
        return cmd_verify(cfg);
    }
    if (cfg.command == "sde") {
        return cmd_sde(cfg);
    }
    if (cfg.command == "gibbs") {
        return cmd_gibbs(cfg);
    }
    if (cfg.command == "gen-data") {
        return cmd_gendata(cfg);
    }
    if (cfg.command == "mnist") {
        return cmd_mnist(cfg);
    }
    throw ConfigError("unknown command \"" + cfg.command + "\"");
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Regularized depth-2 net training, Langevin and Gibbs-measure experiments", "villani-net"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    for (const auto& name : command_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--output-dir", output_dir, "override the config output_dir");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (!std::filesystem::exists(config_path)) {
            throw ConfigError("config file not found: " + config_path);
        }
        json doc;
        try {
            doc = json::parse(read_text_file(config_path));
        } catch (const json::parse_error& e) {
            throw ConfigError("config is not valid JSON: " + std::string(e.what()));
        }
        if (!doc.is_object()) {
            throw ConfigError("config: expected an object");
        }
        if (seed) {
            doc["seed"] = *seed;
        }
        if (output_dir) {
            doc["output_dir"] = *output_dir;
        }
        const RunConfig cfg = parse_config(command, doc);
        const CommandResult res = run_command(cfg);
        for (const auto& msg : res.messages) {
            std::cout << msg << '\n';
        }
        for (const auto& path : res.artifacts) {
            std::cout << "wrote " << path.string() << '\n';
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "villani-net " << command << ": error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace villani
