#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace villani {

using Rng = std::mt19937_64;

/// Seed for the k-th member of an ensemble (splitmix64 of master + k).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k);

/// Fills `m` with i.i.d. standard normals in column-major order.
void fill_normal(Eigen::MatrixXd& m, Rng& rng);

}  // namespace villani
