#include "villani/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>

#include "villani/error.hpp"
#include "villani/io.hpp"

namespace villani {

namespace {

using nlohmann::json;

// Object reader that remembers which keys were consumed.
class Obj {
public:
    Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) {
            throw ConfigError(where_ + ": expected an object");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        return has(key) ? as_number(raw(key), path(key)) : fallback;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        return has(key) ? as_integer(raw(key), path(key)) : fallback;
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = raw(key);
        if (!v.is_string()) {
            throw ConfigError(path(key) + ": expected a string");
        }
        return v.get<std::string>();
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) {
            return fallback;
        }
        const json& v = raw(key);
        if (!v.is_boolean()) {
            throw ConfigError(path(key) + ": expected true or false");
        }
        return v.get<bool>();
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

    void close() const {
        for (const auto& item : j_.items()) {
            if (!used_.count(item.key())) {
                throw ConfigError(where_ + ": unknown key \"" + item.key() + "\"");
            }
        }
    }

    static double as_number(const json& v, const std::string& where) {
        if (!v.is_number()) {
            throw ConfigError(where + ": expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            throw ConfigError(where + ": expected a finite number");
        }
        return x;
    }

    static std::int64_t as_integer(const json& v, const std::string& where) {
        if (!v.is_number_integer()) {
            throw ConfigError(where + ": expected an integer");
        }
        return v.get<std::int64_t>();
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + ": expected a non-empty array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(Obj::as_number(v[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

MatrixXd number_matrix(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty() || !v[0].is_array() || v[0].empty()) {
        throw ConfigError(where + ": expected a non-empty array of rows");
    }
    const auto rows = static_cast<Index>(v.size());
    const auto cols = static_cast<Index>(v[0].size());
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const auto row = number_list(v[static_cast<std::size_t>(i)], where + "[" + std::to_string(i) + "]");
        if (static_cast<Index>(row.size()) != cols) {
            throw ConfigError(where + ": rows have different lengths");
        }
        for (Index k = 0; k < cols; ++k) {
            m(i, k) = row[static_cast<std::size_t>(k)];
        }
    }
    return m;
}

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw ConfigError(msg);
    }
}

DataSection parse_data(const json& j) {
    Obj o(j, "data");
    DataSection d;
    const std::string kind = o.string("kind", "synthetic");
    if (kind == "synthetic") {
        d.kind = DataSection::Kind::Synthetic;
        d.synthetic.n_raw = o.integer("n_raw", d.synthetic.n_raw);
        d.synthetic.dim_d = o.integer("dim_d", d.synthetic.dim_d);
        d.synthetic.margin = o.number("margin", d.synthetic.margin);
        d.synthetic.test_fraction = o.number("test_fraction", d.synthetic.test_fraction);
        if (o.has("seed")) {
            const auto seed = o.integer("seed", 0);
            require(seed >= 0, "data.seed: must be >= 0");
            d.synthetic.seed = static_cast<std::uint64_t>(seed);
            d.synthetic_seed_given = true;
        }
        try {
            d.synthetic.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("data: ") + e.what());
        }
    } else if (kind == "inline") {
        d.kind = DataSection::Kind::Inline;
        require(o.has("features") && o.has("labels"), "data: inline data needs features and labels");
        d.features = number_matrix(o.raw("features"), "data.features");
        const auto labels = number_list(o.raw("labels"), "data.labels");
        d.labels = Eigen::Map<const VectorXd>(labels.data(), static_cast<Index>(labels.size()));
        try {
            (void)LabeledDataset::create(d.features, d.labels);
        } catch (const Error& e) {
            throw ConfigError(std::string("data: ") + e.what());
        }
    } else {
        throw ConfigError("data.kind: expected \"synthetic\" or \"inline\"");
    }
    o.close();
    return d;
}

MnistSection parse_mnist(const json& j) {
    Obj o(j, "mnist");
    MnistSection m;
    std::string fallback = "data/mnist";
    if (const char* env = std::getenv("VILLANI_MNIST_DIR"); env != nullptr && *env != '\0') {
        fallback = env;
    }
    m.dir = o.string("dir", fallback);
    if (o.has("pairs")) {
        const json& v = o.raw("pairs");
        require(v.is_array() && !v.empty(), "mnist.pairs: expected a non-empty array of [a, b]");
        m.pairs.clear();
        for (const auto& pair : v) {
            require(pair.is_array() && pair.size() == 2, "mnist.pairs: each entry must be [a, b]");
            const auto a = Obj::as_integer(pair[0], "mnist.pairs");
            const auto b = Obj::as_integer(pair[1], "mnist.pairs");
            require(a >= 0 && a <= 9 && b >= 0 && b <= 9 && a != b,
                    "mnist.pairs: digits must be distinct and in 0..9");
            // the smaller digit maps to +1
            m.pairs.emplace_back(static_cast<int>(std::min(a, b)), static_cast<int>(std::max(a, b)));
        }
    }
    const std::string scale = o.string("scale", "max_norm");
    if (scale == "max_norm") {
        m.scale = PixelScale::NormalizeByMaxNorm;
    } else if (scale == "unit") {
        m.scale = PixelScale::Unit;
    } else {
        throw ConfigError("mnist.scale: expected \"max_norm\" or \"unit\"");
    }
    o.close();
    for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                             "t10k-labels-idx1-ubyte"}) {
        require(std::filesystem::exists(m.dir / name),
                "mnist.dir: missing file " + (m.dir / name).string());
    }
    return m;
}

NetSection parse_net(const json& j) {
    Obj o(j, "net");
    NetSection n;
    if (o.has("p")) {
        const json& v = o.raw("p");
        n.widths.clear();
        if (v.is_array()) {
            require(!v.empty(), "net.p: empty width list");
            for (const auto& w : v) {
                n.widths.push_back(Obj::as_integer(w, "net.p"));
            }
        } else {
            n.widths.push_back(Obj::as_integer(v, "net.p"));
        }
        for (Index w : n.widths) {
            require(w >= 1, "net.p: widths must be >= 1");
        }
    }
    try {
        n.activation = parse_activation(o.string("activation", "sigmoid:1.0"));
    } catch (const Error& e) {
        throw ConfigError(std::string("net.activation: ") + e.what());
    }
    if (o.has("outer_init")) {
        const json& v = o.raw("outer_init");
        if (v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "normalized_gaussian") {
                n.outer_init = NetSection::OuterInit::NormalizedGaussian;
            } else if (s == "uniform") {
                n.outer_init = NetSection::OuterInit::Uniform;
            } else {
                throw ConfigError("net.outer_init: expected \"normalized_gaussian\", \"uniform\" or a list");
            }
        } else {
            const auto a = number_list(v, "net.outer_init");
            n.outer_init = NetSection::OuterInit::Explicit;
            n.outer = Eigen::Map<const VectorXd>(a.data(), static_cast<Index>(a.size()));
            require(n.widths.size() == 1 && n.widths[0] == n.outer.size(),
                    "net.outer_init: explicit outer layer must have length p (single width)");
        }
    }
    o.close();
    return n;
}

SgdSection parse_sgd(const json& j, SgdSection s) {
    Obj o(j, "sgd");
    s.step = o.number("step", s.step);
    s.batch = o.integer("batch", s.batch);
    require(!(o.has("epochs") && o.has("steps")), "sgd: give either epochs or steps, not both");
    if (o.has("epochs")) {
        s.epochs = o.integer("epochs", 0);
        s.steps.reset();
    }
    if (o.has("steps")) {
        s.steps = o.integer("steps", 0);
        s.epochs.reset();
    }
    s.record_every = o.integer("record_every", s.record_every);
    s.init_sigma = o.number("init_sigma", s.init_sigma);
    o.close();
    require(s.step >= 0.0, "sgd.step: must be >= 0");
    require(s.batch >= 1, "sgd.batch: must be >= 1");
    require(s.epochs || s.steps, "sgd: epochs or steps is required");
    require(!s.epochs || *s.epochs >= 1, "sgd.epochs: must be >= 1");
    require(!s.steps || *s.steps >= 1, "sgd.steps: must be >= 1");
    require(s.record_every >= 0, "sgd.record_every: must be >= 0");
    require(s.init_sigma > 0.0, "sgd.init_sigma: must be > 0");
    return s;
}

SdeSection parse_sde(const json& j) {
    Obj o(j, "sde");
    SdeSection s;
    s.temp_s = o.number("temp_s", s.temp_s);
    if (o.has("dt")) {
        s.dt = o.number("dt", 0.0);
        require(*s.dt > 0.0, "sde.dt: must be > 0");
    }
    s.horizon = o.number("horizon", s.horizon);
    s.ensemble = static_cast<int>(o.integer("ensemble", s.ensemble));
    s.record_every = o.integer("record_every", s.record_every);
    s.init_sigma = o.number("init_sigma", s.init_sigma);
    if (o.has("init_at")) {
        s.init_at = number_matrix(o.raw("init_at"), "sde.init_at");
    }
    s.fit = o.boolean("fit", s.fit);
    if (o.has("plateau")) {
        s.plateau = o.number("plateau", 0.0);
    }
    o.close();
    require(s.temp_s >= 0.0, "sde.temp_s: must be >= 0");
    require(s.horizon > 0.0, "sde.horizon: must be > 0");
    require(s.ensemble >= 1, "sde.ensemble: must be >= 1");
    require(s.record_every >= 1, "sde.record_every: must be >= 1");
    require(s.init_sigma > 0.0, "sde.init_sigma: must be > 0");
    return s;
}

GibbsSection parse_gibbs(const json& j) {
    Obj o(j, "gibbs");
    GibbsSection g;
    const std::string pot = o.string("potential", "quadratic");
    if (pot == "quadratic") {
        g.potential = GibbsSection::Potential::Quadratic;
    } else if (pot == "double_well") {
        g.potential = GibbsSection::Potential::DoubleWell;
    } else if (pot == "loss") {
        g.potential = GibbsSection::Potential::Loss;
    } else {
        throw ConfigError("gibbs.potential: expected \"quadratic\", \"double_well\" or \"loss\"");
    }
    g.dim = static_cast<int>(o.integer("dim", g.dim));
    if (o.has("box")) {
        const json& v = o.raw("box");
        if (!(v.is_string() && v.get<std::string>() == "auto")) {
            g.box = Obj::as_number(v, "gibbs.box");
            require(*g.box > 0.0, "gibbs.box: must be > 0");
        }
    }
    g.grid_n = static_cast<int>(o.integer("grid_n", g.grid_n));
    g.temp_s = o.number("temp_s", g.temp_s);
    g.r = o.number("r", g.r);
    g.poincare = o.boolean("poincare", g.poincare);
    o.close();
    require(g.dim == 1 || g.dim == 2, "gibbs.dim: must be 1 or 2");
    require(g.grid_n >= 64 && g.grid_n % 2 == 0, "gibbs.grid_n: must be even and >= 64");
    require(g.temp_s > 0.0, "gibbs.temp_s: must be > 0");
    require(g.r >= 0.0, "gibbs.r: must be >= 0");
    return g;
}

VerifySection parse_verify(const json& j) {
    Obj o(j, "verify");
    VerifySection v;
    v.s = o.number("s", v.s);
    v.directions = static_cast<int>(o.integer("directions", v.directions));
    v.high_water = o.number("high_water", v.high_water);
    v.max_power = static_cast<int>(o.integer("max_power", v.max_power));
    const std::string variant = o.string("variant", "lemma");
    if (variant == "lemma") {
        v.variant = LambdaCVariant::Lemma;
    } else if (variant == "proof") {
        v.variant = LambdaCVariant::Proof;
    } else {
        throw ConfigError("verify.variant: expected \"lemma\" or \"proof\"");
    }
    v.init_sigma = o.number("init_sigma", v.init_sigma);
    o.close();
    require(v.s > 0.0, "verify.s: must be > 0");
    require(v.directions >= 1, "verify.directions: must be >= 1");
    require(v.max_power >= 0 && v.max_power <= 60, "verify.max_power: must lie in 0..60");
    require(v.init_sigma > 0.0, "verify.init_sigma: must be > 0");
    return v;
}

}  // namespace

RunConfig parse_config(const std::string& command, const nlohmann::json& doc) {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) {
        throw ConfigError("unknown command \"" + command + "\"");
    }
    Obj o(doc, "config");
    RunConfig cfg;
    cfg.command = command;
    if (o.has("seed")) {
        const auto seed = o.integer("seed", 0);
        require(seed >= 0, "config.seed: must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(seed);
    }
    cfg.output_dir = o.string("output_dir", cfg.output_dir.string());
    {
        const auto threads = o.integer("threads", 0);
        require(threads >= 0, "config.threads: must be >= 0");
        cfg.threads = static_cast<unsigned>(threads);
    }

    int sections = 0;
    for (const char* key : {"sgd", "sde", "gibbs", "verify"}) {
        sections += o.has(key) ? 1 : 0;
    }
    require(sections <= 1, "config: more than one command section (sgd, sde, gibbs, verify)");
    const bool is_mnist = command == "mnist";
    require(!(o.has("data") && o.has("mnist")), "config: give either data or mnist, not both");

    if (o.has("data")) {
        cfg.data = parse_data(o.raw("data"));
        if (!cfg.data->synthetic_seed_given) {
            cfg.data->synthetic.seed = cfg.seed;
        }
    }
    if (o.has("mnist")) {
        require(is_mnist, "config: the mnist section belongs to the mnist command");
        cfg.mnist = parse_mnist(o.raw("mnist"));
    } else if (is_mnist) {
        cfg.mnist = parse_mnist(json::object());
    }
    if (is_mnist) {
        cfg.net.widths = {12};
        cfg.lambdas = {0.03125};
    }
    if (o.has("net")) {
        cfg.net = parse_net(o.raw("net"));
        cfg.net_given = true;
    }
    if (o.has("loss")) {
        Obj l(o.raw("loss"), "loss");
        require(!(l.has("lambda") && l.has("lambda_grid")), "loss: give lambda or lambda_grid, not both");
        if (l.has("lambda")) {
            cfg.lambdas = {l.number("lambda", 0.0)};
        } else if (l.has("lambda_grid")) {
            cfg.lambdas = number_list(l.raw("lambda_grid"), "loss.lambda_grid");
        }
        l.close();
        for (double lam : cfg.lambdas) {
            require(lam >= 0.0, "loss: lambda must be >= 0");
        }
        cfg.loss_given = true;
    }

    auto expect_section = [&](const char* key) {
        require(o.has(key), std::string("config: command ") + command + " needs a " + key + " section");
    };
    auto reject_sections = [&](std::initializer_list<const char*> keys) {
        for (const char* key : keys) {
            require(!o.has(key), std::string("config: section ") + key + " does not apply to " + command);
        }
    };

    if (command == "train") {
        expect_section("sgd");
        require(cfg.data.has_value(), "config: train needs a data section");
        cfg.sgd = parse_sgd(o.raw("sgd"), SgdSection{});
    } else if (command == "mnist") {
        reject_sections({"sde", "gibbs", "verify"});
        SgdSection defaults;
        defaults.batch = 3000;
        defaults.epochs = 100;
        defaults.step = 1.0;
        cfg.sgd = o.has("sgd") ? parse_sgd(o.raw("sgd"), defaults) : defaults;
    } else if (command == "sde") {
        expect_section("sde");
        require(cfg.data.has_value(), "config: sde needs a data section");
        cfg.sde = parse_sde(o.raw("sde"));
    } else if (command == "gibbs") {
        expect_section("gibbs");
        cfg.gibbs = parse_gibbs(o.raw("gibbs"));
        if (cfg.gibbs->potential == GibbsSection::Potential::Loss) {
            require(cfg.data.has_value(), "config: gibbs potential \"loss\" needs a data section");
        }
    } else if (command == "verify") {
        expect_section("verify");
        require(cfg.data.has_value(), "config: verify needs a data section");
        cfg.verify = parse_verify(o.raw("verify"));
    } else if (command == "gen-data") {
        reject_sections({"sgd", "sde", "gibbs", "verify"});
        require(cfg.data && cfg.data->kind == DataSection::Kind::Synthetic,
                "config: gen-data needs a synthetic data section");
    }
    o.close();
    return cfg;
}

RunConfig load_config(const std::string& command, const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw ConfigError("config file not found: " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(command, doc);
}

}  // namespace villani
