#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "villani/commands.hpp"
#include "villani/config.hpp"
#include "villani/error.hpp"
#include "villani/io.hpp"

using namespace villani;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "villani_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& command, const json& config, const fs::path& dir, const std::string& extra = "") {
    const fs::path cfg = dir / "config.json";
    write_text_file(cfg, config.dump(2));
    const std::string line = std::string(VILLANI_CLI_PATH) + " " + command + " --config " + cfg.string() + " " +
                             extra + " > " + (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(line.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

std::size_t line_count(const fs::path& p) {
    const std::string s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

json inline_data() {
    return {{"kind", "inline"},
            {"features", {{0.6, 0.1}, {0.4, -0.5}, {-0.5, 0.3}, {-0.2, -0.7}, {0.3, 0.3}}},
            {"labels", {1, 1, -1, -1, 1}}};
}

json small_synthetic() { return {{"kind", "synthetic"}, {"n_raw", 400}, {"dim_d", 4}}; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("schema is closed") {
    const json base{{"data", small_synthetic()}, {"sgd", {{"steps", 5}}}};
    CHECK_NOTHROW(parse_config("train", base));
    json typo = base;
    typo["sgd"]["stpe"] = 0.1;
    CHECK_THROWS_AS(parse_config("train", typo), ConfigError);
    json top = base;
    top["extra"] = 1;
    CHECK_THROWS_AS(parse_config("train", top), ConfigError);
    json nested = base;
    nested["data"]["colour"] = "red";
    CHECK_THROWS_AS(parse_config("train", nested), ConfigError);
    CHECK_THROWS_AS(parse_config("fly", base), ConfigError);
    CHECK_THROWS_AS(parse_config("train", json{{"data", small_synthetic()}}), ConfigError);
    CHECK_THROWS_AS(parse_config("train", json{{"sgd", {{"steps", 5}}}}), ConfigError);
    json both = base;
    both["sde"] = json::object();
    CHECK_THROWS_AS(parse_config("train", both), ConfigError);
    json both_counts = base;
    both_counts["sgd"]["epochs"] = 2;
    CHECK_THROWS_AS(parse_config("train", both_counts), ConfigError);
    json bad_act = base;
    bad_act["net"] = {{"activation", "relu"}};
    CHECK_THROWS_AS(parse_config("train", bad_act), ConfigError);
    json bad_lambda = base;
    bad_lambda["loss"] = {{"lambda", -1.0}};
    CHECK_THROWS_AS(parse_config("train", bad_lambda), ConfigError);
    CHECK_THROWS_AS(parse_config("gen-data", json{{"data", inline_data()}}), ConfigError);
    CHECK_THROWS_AS(parse_config("gibbs", json{{"gibbs", {{"potential", "loss"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config("gibbs", json{{"gibbs", {{"grid_n", 63}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config("verify", json{{"data", inline_data()}, {"verify", {{"variant", "x"}}}}),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("train", json::array()), ConfigError);
}

TEST_CASE("defaults and seeds") {
    const RunConfig cfg = parse_config("gen-data", json{{"seed", 9}, {"data", small_synthetic()}});
    CHECK(cfg.data->synthetic.seed == 9);
    json given{{"seed", 9}, {"data", small_synthetic()}};
    given["data"]["seed"] = 3;
    CHECK(parse_config("gen-data", given).data->synthetic.seed == 3);
    const RunConfig g = parse_config("gibbs", json{{"gibbs", json::object()}});
    CHECK(g.gibbs->grid_n == 256);
    CHECK(g.lambdas == std::vector<double>{0.0});
    const RunConfig v = parse_config("verify", json{{"data", inline_data()}, {"verify", json::object()}});
    CHECK(v.verify->s == 1e-3);
    CHECK(v.verify->max_power == 10);
}

TEST_CASE("command line errors") {
    const fs::path dir = scratch("errors");
    CHECK(run_cli("train", json{{"data", small_synthetic()}}, dir) == 2);
    CHECK(slurp(dir / "stderr.txt").find("sgd") != std::string::npos);
    CHECK(run_cli("bogus", json::object(), dir) != 0);
    const std::string missing = std::string(VILLANI_CLI_PATH) + " gibbs --config /nonexistent.json > /dev/null 2>&1";
    const int status = std::system(missing.c_str());
    CHECK(WEXITSTATUS(status) == 2);
}

TEST_CASE("gen-data writes the split") {
    const fs::path dir = scratch("gendata");
    const json cfg{{"seed", 4}, {"output_dir", (dir / "out").string()}, {"data", small_synthetic()}};
    REQUIRE(run_cli("gen-data", cfg, dir) == 0);
    const json meta = json::parse(slurp(dir / "out" / "data.json"));
    const auto survivors = meta.at("survivors").get<std::size_t>();
    CHECK(meta.at("n_train").get<std::size_t>() + meta.at("n_test").get<std::size_t>() == survivors);
    CHECK(line_count(dir / "out" / "train.csv") == meta.at("n_train").get<std::size_t>() + 1);
    CHECK(line_count(dir / "out" / "test.csv") == meta.at("n_test").get<std::size_t>() + 1);
    CHECK(slurp(dir / "out" / "train.csv").rfind("x0,x1,x2,x3,y\n", 0) == 0);
}

TEST_CASE("train sweep CSV and overrides") {
    const fs::path dir = scratch("train");
    const json cfg{{"seed", 1},
                   {"output_dir", (dir / "ignored").string()},
                   {"data", small_synthetic()},
                   {"net", {{"p", {1, 3}}, {"activation", "sigmoid:1.0"}}},
                   {"loss", {{"lambda_grid", {0.0, 0.015625, 0.03125}}}},
                   {"sgd", {{"step", 0.1}, {"batch", 8}, {"epochs", 2}}}};
    REQUIRE(run_cli("train", cfg, dir, "--seed 5 --output-dir " + (dir / "a").string()) == 0);
    CHECK_FALSE(fs::exists(dir / "ignored"));
    const std::string sweep = slurp(dir / "a" / "sweep.csv");
    CHECK(sweep.rfind("p,lambda,final_risk,test_accuracy,steps\n", 0) == 0);
    CHECK(line_count(dir / "a" / "sweep.csv") == 7);
    CHECK(sweep.find("\n1,0.015625,") != std::string::npos);
    CHECK(sweep.find("\n3,0.03125,") != std::string::npos);
    CHECK(fs::exists(dir / "a" / "curves" / "train_p3_l2.csv"));
    REQUIRE(run_cli("train", cfg, dir, "--seed 5 --output-dir " + (dir / "b").string()) == 0);
    CHECK(slurp(dir / "b" / "sweep.csv") == sweep);
    REQUIRE(run_cli("train", cfg, dir, "--seed 6 --output-dir " + (dir / "c").string()) == 0);
    CHECK(slurp(dir / "c" / "sweep.csv") != sweep);
}

TEST_CASE("verify reports both outcomes") {
    const fs::path dir = scratch("verify");
    const json cfg{{"seed", 2},
                   {"output_dir", (dir / "out").string()},
                   {"data", inline_data()},
                   {"net", {{"p", 3}}},
                   {"loss", {{"lambda_grid", {0.0, 0.5}}}},
                   {"verify", {{"s", 1e-2}}}};
    REQUIRE(run_cli("verify", cfg, dir) == 0);
    const json out = json::parse(slurp(dir / "out" / "verify.json"));
    REQUIRE(out.is_array());
    CHECK_FALSE(out[0].at("divergence_verified").get<bool>());
    CHECK(out[1].at("divergence_verified").get<bool>());
    CHECK(out[1].at("lambda_c_proof").get<double>() / out[1].at("lambda_c_lemma").get<double>() == 4.0);
    const std::string first = slurp(dir / "out" / "verify.json");
    REQUIRE(run_cli("verify", cfg, dir) == 0);
    CHECK(slurp(dir / "out" / "verify.json") == first);
}

TEST_CASE("gibbs lab output") {
    const fs::path dir = scratch("gibbs");
    const json cfg{{"output_dir", (dir / "out").string()},
                   {"loss", {{"lambda", 1.0}}},
                   {"gibbs", {{"potential", "quadratic"}, {"temp_s", 0.5}, {"r", 2.0}}}};
    REQUIRE(run_cli("gibbs", cfg, dir) == 0);
    const json out = json::parse(slurp(dir / "out" / "gibbs.json"));
    CHECK(out.at("z_s").get<double>() == doctest::Approx(1.2533141373).epsilon(1e-6));
    CHECK(out.at("poincare").at("all_ok").get<bool>());
    CHECK(slurp(dir / "out" / "density.csv").rfind("w,density\n", 0) == 0);
    CHECK(line_count(dir / "out" / "density.csv") == 258);
}

TEST_CASE("sde run with a fit") {
    const fs::path dir = scratch("sde");
    const json cfg{{"seed", 3},
                   {"output_dir", (dir / "out").string()},
                   {"data", {{"kind", "inline"}, {"features", {{0.0}}}, {"labels", {1}}}},
                   {"net", {{"p", 1}, {"outer_init", {1.0}}}},
                   {"loss", {{"lambda", 1.0}}},
                   {"sde",
                    {{"temp_s", 0.5},
                     {"dt", 1e-3},
                     {"horizon", 3.0},
                     {"ensemble", 500},
                     {"record_every", 20},
                     {"init_at", {{3.0}}}}}};
    REQUIRE(run_cli("sde", cfg, dir) == 0);
    const json out = json::parse(slurp(dir / "out" / "sde.json"));
    CHECK(out.contains("fit"));
    CHECK(out.at("fit").at("lambda_hat").get<double>() == doctest::Approx(2.0).epsilon(0.2));
    CHECK(line_count(dir / "out" / "series.csv") == 152);
    const std::string series = slurp(dir / "out" / "series.csv");
    REQUIRE(run_cli("sde", cfg, dir) == 0);
    CHECK(slurp(dir / "out" / "series.csv") == series);
}

TEST_CASE("mnist command") {
    const char* env = std::getenv("VILLANI_MNIST_DIR");
    const fs::path mdir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("/root/data/mnist");
    if (!fs::exists(mdir / "t10k-labels-idx1-ubyte")) {
        MESSAGE("MNIST files not found; skipping");
        return;
    }
    const fs::path dir = scratch("mnist");
    const json cfg{{"output_dir", (dir / "out").string()},
                   {"mnist", {{"dir", mdir.string()}, {"pairs", {{0, 1}}}}},
                   {"net", {{"p", 2}}},
                   {"sgd", {{"epochs", 1}, {"batch", 3000}}}};
    REQUIRE(run_cli("mnist", cfg, dir) == 0);
    const json out = json::parse(slurp(dir / "out" / "mnist.json"));
    const json& run = out.at("runs").at(0);
    CHECK(run.at("n_train").get<int>() == 12665);
    CHECK(run.at("steps").get<int>() == 5);
    CHECK(run.at("accuracy").get<double>() >= 0.0);
    CHECK(run.at("accuracy").get<double>() <= 1.0);
    CHECK(run.at("b_x").get<double>() == doctest::Approx(1.0));
    json bad = cfg;
    bad["mnist"]["dir"] = (dir / "nowhere").string();
    CHECK_THROWS_AS(parse_config("mnist", bad), ConfigError);
}

}  // TEST_SUITE
