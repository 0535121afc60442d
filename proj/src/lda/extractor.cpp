#include "lcps/lda/extractor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace lcps {

PooledStatsExtractor::PooledStatsExtractor(Index side, Index grid) : side_(side), grid_(grid)
{
    if (grid < 1 || side < grid || side % grid != 0)
        throw ConfigError("extractor: side " + std::to_string(side) + " is not divisible into a " + std::to_string(grid)
                          + "x" + std::to_string(grid) + " grid");
}

std::string PooledStatsExtractor::describe() const
{
    return "pooled-stats(grid=" + std::to_string(grid_) + ", side=" + std::to_string(side_) + ")";
}

Eigen::VectorXd PooledStatsExtractor::extract(const GrayImage& image, const std::string&) const
{
    if (image.rows() != side_ || image.cols() != side_)
        throw DimensionError("extractor: image is " + std::to_string(image.rows()) + "x" + std::to_string(image.cols())
                             + ", expected side " + std::to_string(side_));
    const Eigen::ArrayXXd x = image.cast<double>();
    if (!x.allFinite())
        throw NumericError("extractor: non-finite pixel");

    Eigen::VectorXd z(dimension());
    const Index cell = side_ / grid_;
    for (Index gy = 0; gy < grid_; ++gy)
        for (Index gx = 0; gx < grid_; ++gx)
            z[gy * grid_ + gx] = x.block(gy * cell, gx * cell, cell, cell).mean();

    const double mean = x.mean();
    const double sd = std::sqrt((x - mean).square().mean());
    Index k = grid_ * grid_;
    z[k++] = mean;
    z[k++] = sd;
    z[k++] = side_ > 1 ? (x.rightCols(side_ - 1) - x.leftCols(side_ - 1)).abs().mean() : 0.0;
    z[k++] = side_ > 1 ? (x.bottomRows(side_ - 1) - x.topRows(side_ - 1)).abs().mean() : 0.0;
    const double n = static_cast<double>(x.size());
    z[k++] = static_cast<double>((x > mean + 2.0 * sd).count()) / n;
    z[k++] = static_cast<double>((x < mean - 2.0 * sd).count()) / n;
    return z;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v)
{
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& where)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is)
        throw FormatError(where + ": truncated file");
    return v;
}

} // namespace

PrecomputedEmbeddings::PrecomputedEmbeddings(std::map<std::string, Eigen::VectorXd> vectors)
    : vectors_(std::move(vectors))
{
    for (const auto& [id, v] : vectors_) {
        if (dimension_ == 0)
            dimension_ = v.size();
        if (v.size() != dimension_ || v.size() == 0)
            throw DimensionError("embeddings: '" + id + "' has dimension " + std::to_string(v.size()) + ", expected "
                                 + std::to_string(dimension_));
        if (!v.allFinite())
            throw NumericError("embeddings: '" + id + "' is not finite");
    }
}

PrecomputedEmbeddings PrecomputedEmbeddings::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open embeddings file '" + path.string() + "'");
    const std::string where = "embeddings '" + path.string() + "'";
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "LCPE", 4) != 0)
        throw FormatError(where + ": bad magic");
    const auto version = get<std::uint32_t>(in, where);
    if (version != kVersion)
        throw FormatError(where + ": unsupported version " + std::to_string(version));
    const auto count = get<std::uint64_t>(in, where);
    std::map<std::string, Eigen::VectorXd> vectors;
    for (std::uint64_t r = 0; r < count; ++r) {
        const auto len = get<std::uint32_t>(in, where);
        std::string id(len, '\0');
        in.read(id.data(), len);
        const auto d = get<std::uint32_t>(in, where);
        Eigen::VectorXd v(d);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(d * sizeof(double)));
        if (!in)
            throw FormatError(where + ": truncated record " + std::to_string(r));
        if (!vectors.emplace(id, std::move(v)).second)
            throw FormatError(where + ": duplicate id '" + id + "'");
    }
    return PrecomputedEmbeddings(std::move(vectors));
}

void PrecomputedEmbeddings::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot write embeddings file '" + path.string() + "'");
    out.write("LCPE", 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, vectors_.size());
    for (const auto& [id, v] : vectors_) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
}

Eigen::VectorXd PrecomputedEmbeddings::extract(const GrayImage&, const std::string& id) const
{
    const auto it = vectors_.find(id);
    if (it == vectors_.end())
        throw LookupError("embeddings: no vector for image '" + id + "'");
    return it->second;
}

std::string PrecomputedEmbeddings::describe() const
{
    return "precomputed(d=" + std::to_string(dimension_) + ", n=" + std::to_string(vectors_.size()) + ")";
}

} // namespace lcps
