#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "villani/net_loss.hpp"

namespace villani {

/// Unit-normalized Gaussian rows labelled by the sign of the last coordinate;
/// rows with |x_d| <= margin are discarded.
struct SyntheticSpec {
    Index n_raw = 10000;
    Index dim_d = 10;
    double margin = 0.2;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticSplit {
    LabeledDataset train;
    LabeledDataset test;
    Index survivors = 0;
};

SyntheticSplit gen_synthetic(const SyntheticSpec& spec);

inline constexpr std::uint32_t kIdxImagesMagic = 2051;
inline constexpr std::uint32_t kIdxLabelsMagic = 2049;

struct IdxFile {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;
};

IdxFile parse_idx(const std::vector<std::uint8_t>& bytes);
IdxFile load_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_idx(const IdxFile& file);
void write_idx(const std::filesystem::path& path, const IdxFile& file);

enum class PixelScale {
    Unit,                ///< bytes / 255
    NormalizeByMaxNorm,  ///< bytes / 255, then every row divided by the largest row norm
};

/// Keeps images labelled digit_a (-> +1) or digit_b (-> -1), flattened row-major.
LabeledDataset binary_pair(const IdxFile& images, const IdxFile& labels, int digit_a, int digit_b,
                           PixelScale scale);

/// One row per sample: features then label, with header x0,...,x{d-1},y.
std::string dataset_csv(const LabeledDataset& data);

}  // namespace villani
