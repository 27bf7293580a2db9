#include "villani/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>

#include "villani/error.hpp"
#include "villani/io.hpp"
#include "villani/rng.hpp"

namespace villani {

void SyntheticSpec::validate() const {
    if (n_raw < 1 || dim_d < 1) {
        throw InvalidArgument("synthetic data: n_raw and dim_d must be >= 1");
    }
    if (!(margin >= 0.0) || !std::isfinite(margin)) {
        throw InvalidArgument("synthetic data: margin must be >= 0");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw InvalidArgument("synthetic data: test_fraction must lie in (0, 1)");
    }
}

SyntheticSplit gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const Index d = spec.dim_d;
    Rng rng(derive_seed(spec.seed, 0));
    std::normal_distribution<double> normal;
    std::vector<VectorXd> rows;
    std::vector<double> labels;
    Index pos = 0;
    Index neg = 0;
    VectorXd x(d);
    for (Index i = 0; i < spec.n_raw; ++i) {
        for (Index k = 0; k < d; ++k) {
            x(k) = normal(rng);
        }
        const double norm = x.norm();
        if (norm == 0.0) {
            continue;
        }
        x /= norm;
        const double last = x(d - 1);
        if (last > spec.margin) {
            rows.push_back(x);
            labels.push_back(1.0);
            ++pos;
        } else if (last < -spec.margin) {
            rows.push_back(x);
            labels.push_back(-1.0);
            ++neg;
        }
    }
    if (pos < 2 || neg < 2) {
        throw InvalidArgument("synthetic data: fewer than 2 surviving rows in a class");
    }
    const auto n = static_cast<Index>(rows.size());
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    Rng split_rng(derive_seed(spec.seed, 1));
    std::shuffle(order.begin(), order.end(), split_rng);
    auto n_test = static_cast<Index>(std::llround(spec.test_fraction * static_cast<double>(n)));
    n_test = std::clamp<Index>(n_test, 1, n - 1);

    auto gather = [&](Index lo, Index hi) {
        MatrixXd f(hi - lo, d);
        VectorXd y(hi - lo);
        for (Index r = lo; r < hi; ++r) {
            const auto src = static_cast<std::size_t>(order[static_cast<std::size_t>(r)]);
            f.row(r - lo) = rows[src].transpose();
            y(r - lo) = labels[src];
        }
        return LabeledDataset::create(std::move(f), std::move(y));
    };
    return SyntheticSplit{gather(n_test, n), gather(0, n_test), n};
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void write_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 24));
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxFile parse_idx(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4) {
        throw IdxFormatError("IDX: file shorter than its magic number");
    }
    IdxFile out;
    out.magic = read_be32(bytes, 0);
    std::size_t axes = 0;
    if (out.magic == kIdxImagesMagic) {
        axes = 3;
    } else if (out.magic == kIdxLabelsMagic) {
        axes = 1;
    } else {
        throw IdxFormatError("IDX: bad magic " + std::to_string(out.magic));
    }
    const std::size_t header = 4 + 4 * axes;
    if (bytes.size() < header) {
        throw IdxFormatError("IDX: truncated header");
    }
    std::uint64_t total = 1;
    for (std::size_t a = 0; a < axes; ++a) {
        const std::uint32_t dim = read_be32(bytes, 4 + 4 * a);
        out.dims.push_back(dim);
        if (dim != 0 && total > std::numeric_limits<std::uint64_t>::max() / dim) {
            throw IdxFormatError("IDX: dimension product overflows");
        }
        total *= dim;
    }
    if (total > std::numeric_limits<std::size_t>::max() - header) {
        throw IdxFormatError("IDX: dimension product overflows");
    }
    const std::size_t expected = header + static_cast<std::size_t>(total);
    if (bytes.size() < expected) {
        throw IdxFormatError("IDX: truncated payload (" + std::to_string(bytes.size() - header) + " of " +
                             std::to_string(total) + " bytes)");
    }
    if (bytes.size() > expected) {
        throw IdxFormatError("IDX: trailing bytes after payload");
    }
    out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
    return out;
}

IdxFile load_idx(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IdxFormatError("IDX: cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_idx(bytes);
}

std::vector<std::uint8_t> serialize_idx(const IdxFile& file) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * file.dims.size() + file.payload.size());
    write_be32(out, file.magic);
    for (auto d : file.dims) {
        write_be32(out, d);
    }
    out.insert(out.end(), file.payload.begin(), file.payload.end());
    return out;
}

void write_idx(const std::filesystem::path& path, const IdxFile& file) {
    const auto bytes = serialize_idx(file);
    write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

LabeledDataset binary_pair(const IdxFile& images, const IdxFile& labels, int digit_a, int digit_b,
                           PixelScale scale) {
    if (digit_a == digit_b || digit_a < 0 || digit_a > 9 || digit_b < 0 || digit_b > 9) {
        throw InvalidArgument("binary_pair: digits must be distinct and in 0..9");
    }
    if (images.magic != kIdxImagesMagic || labels.magic != kIdxLabelsMagic) {
        throw IdxFormatError("binary_pair: expected an images file and a labels file");
    }
    const std::size_t count = labels.dims.at(0);
    if (images.dims.at(0) != count) {
        throw DimensionMismatch("binary_pair: image and label counts differ");
    }
    const std::size_t pixels = std::size_t{images.dims[1]} * images.dims[2];
    std::vector<std::size_t> keep;
    bool seen_a = false;
    bool seen_b = false;
    for (std::size_t i = 0; i < count; ++i) {
        const int lab = labels.payload[i];
        seen_a = seen_a || lab == digit_a;
        seen_b = seen_b || lab == digit_b;
        if (lab == digit_a || lab == digit_b) {
            keep.push_back(i);
        }
    }
    if (!seen_a || !seen_b) {
        throw InvalidArgument("binary_pair: digit " + std::to_string(seen_a ? digit_b : digit_a) +
                              " does not occur in the labels file");
    }
    MatrixXd f(static_cast<Index>(keep.size()), static_cast<Index>(pixels));
    VectorXd y(static_cast<Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const std::uint8_t* src = images.payload.data() + keep[r] * pixels;
        for (std::size_t c = 0; c < pixels; ++c) {
            f(static_cast<Index>(r), static_cast<Index>(c)) = src[c] / 255.0;
        }
        y(static_cast<Index>(r)) = labels.payload[keep[r]] == digit_a ? 1.0 : -1.0;
    }
    if (scale == PixelScale::NormalizeByMaxNorm) {
        const double max_norm = f.rowwise().norm().maxCoeff();
        if (max_norm > 0.0) {
            f /= max_norm;
        }
    }
    return LabeledDataset::create(std::move(f), std::move(y));
}

std::string dataset_csv(const LabeledDataset& data) {
    std::ostringstream os;
    for (Index k = 0; k < data.dim(); ++k) {
        os << 'x' << k << ',';
    }
    os << "y\n";
    for (Index i = 0; i < data.size(); ++i) {
        for (Index k = 0; k < data.dim(); ++k) {
            os << format_number(data.features(i, k)) << ',';
        }
        os << (data.labels(i) > 0 ? "1" : "-1") << '\n';
    }
    return os.str();
}

}  // namespace villani
