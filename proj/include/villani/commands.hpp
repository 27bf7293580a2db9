#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "villani/config.hpp"

namespace villani {

struct CommandResult {
    std::vector<std::filesystem::path> artifacts;
    std::vector<std::string> messages;  ///< warnings and one-line summaries
};

/// Outer layer of width p: standard normal then unit-normalized, all ones / sqrt(p),
/// or the explicit vector from the config.
VectorXd make_outer(const NetSection& net, Index p, std::uint64_t seed);

CommandResult cmd_train(const RunConfig& cfg);
CommandResult cmd_verify(const RunConfig& cfg);
CommandResult cmd_sde(const RunConfig& cfg);
CommandResult cmd_gibbs(const RunConfig& cfg);
CommandResult cmd_gendata(const RunConfig& cfg);
CommandResult cmd_mnist(const RunConfig& cfg);

/// Dispatches on cfg.command.
CommandResult run_command(const RunConfig& cfg);

/// Full CLI entry point: parses argv, runs, prints messages. Returns the exit code.
int cli_main(int argc, char** argv);

}  // namespace villani
