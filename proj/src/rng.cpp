#include "villani/rng.hpp"

namespace villani {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (k + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void fill_normal(Eigen::MatrixXd& m, Rng& rng) {
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = normal(rng);
    }
}

}  // namespace villani
