#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "villani/bounds.hpp"
#include "villani/data.hpp"
#include "villani/net_loss.hpp"

namespace villani {

// Parsed run configuration. Every section is schema-closed: unknown keys are
// rejected with ConfigError.

struct DataSection {
    enum class Kind { Synthetic, Inline };
    Kind kind = Kind::Synthetic;
    SyntheticSpec synthetic;         ///< Kind::Synthetic; seed filled from the run seed unless given
    bool synthetic_seed_given = false;
    MatrixXd features;               ///< Kind::Inline
    VectorXd labels;
};

struct MnistSection {
    std::filesystem::path dir;
    std::vector<std::pair<int, int>> pairs{{0, 1}};
    PixelScale scale = PixelScale::NormalizeByMaxNorm;
};

struct NetSection {
    std::vector<Index> widths{4};
    ActivationProfile activation;
    enum class OuterInit { NormalizedGaussian, Uniform, Explicit };
    OuterInit outer_init = OuterInit::NormalizedGaussian;
    VectorXd outer;  ///< OuterInit::Explicit
};

struct SgdSection {
    double step = 0.1;
    Index batch = 1;
    std::optional<std::int64_t> epochs;
    std::optional<std::int64_t> steps;
    std::int64_t record_every = 0;  ///< 0: once per epoch
    double init_sigma = 1.0;
};

struct SdeSection {
    double temp_s = 1e-2;
    std::optional<double> dt;  ///< default_dt when absent
    double horizon = 1.0;
    int ensemble = 100;
    std::int64_t record_every = 1;
    double init_sigma = 1.0;
    std::optional<MatrixXd> init_at;
    bool fit = true;
    std::optional<double> plateau;
};

struct GibbsSection {
    enum class Potential { Loss, Quadratic, DoubleWell };
    Potential potential = Potential::Quadratic;
    int dim = 1;                     ///< quadratic only
    std::optional<double> box;       ///< auto when absent
    int grid_n = 256;
    double temp_s = 1.0;
    double r = 1.0;
    bool poincare = true;
};

struct VerifySection {
    double s = 1e-3;
    int directions = 10;
    double high_water = 1e6;
    int max_power = 10;
    LambdaCVariant variant = LambdaCVariant::Lemma;
    double init_sigma = 1.0;
};

struct RunConfig {
    std::string command;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    unsigned threads = 0;
    std::optional<DataSection> data;
    std::optional<MnistSection> mnist;
    NetSection net;
    bool net_given = false;
    std::vector<double> lambdas{0.0};
    bool loss_given = false;
    std::optional<SgdSection> sgd;
    std::optional<SdeSection> sde;
    std::optional<GibbsSection> gibbs;
    std::optional<VerifySection> verify;
};

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"train", "verify", "sde", "gibbs", "gen-data", "mnist"};
    return names;
}

/// Validates `doc` against the schema for `command` and fills defaults.
RunConfig parse_config(const std::string& command, const nlohmann::json& doc);

/// Reads and parses a JSON file, then parse_config.
RunConfig load_config(const std::string& command, const std::filesystem::path& path);

}  // namespace villani
