#include "lcps/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lcps {

void TaskDataset::validate() const
{
    std::set<std::string> train_ids;
    auto check = [&](const ImageSample& s) {
        if (s.image.rows() != s.mask.rows() || s.image.cols() != s.mask.cols())
            throw IngestionError("dataset '" + name + "': image and mask sizes differ for '" + s.id + "'");
        if ((s.mask > 1).any())
            throw IngestionError("dataset '" + name + "': mask of '" + s.id + "' is not binary");
    };
    for (const auto& s : train) {
        check(s);
        train_ids.insert(s.id);
    }
    for (const auto& s : test) {
        check(s);
        if (train_ids.contains(s.id))
            throw IngestionError("dataset '" + name + "': '" + s.id + "' appears in both splits");
    }
}

namespace {

std::string lower_ext(const std::filesystem::path& p)
{
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

// Skips whitespace and '#' comments in a PNM header.
void skip_pnm_space(std::istream& in)
{
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c != EOF && std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

Image8 read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IngestionError("cannot open '" + path.string() + "'");
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5" && magic != "P2")
        throw IngestionError("'" + path.string() + "' is not a grayscale PGM");
    long w = 0, h = 0, maxval = 0;
    skip_pnm_space(in);
    in >> w;
    skip_pnm_space(in);
    in >> h;
    skip_pnm_space(in);
    in >> maxval;
    if (!in || w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw IngestionError("'" + path.string() + "': malformed PGM header");
    in.get();
    Image8 img(h, w);
    auto scale = [&](long v) { return static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(v) / maxval)); };
    if (magic == "P5") {
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> buf(static_cast<std::size_t>(w * h * bytes));
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in)
            throw IngestionError("'" + path.string() + "': truncated PGM payload");
        for (long i = 0; i < w * h; ++i) {
            const long v = bytes == 2 ? (buf[2 * i] << 8 | buf[2 * i + 1]) : buf[i];
            img.data()[i] = maxval == 255 ? static_cast<std::uint8_t>(v) : scale(v);
        }
    } else {
        for (long i = 0; i < w * h; ++i) {
            long v = 0;
            in >> v;
            if (!in)
                throw IngestionError("'" + path.string() + "': truncated PGM payload");
            img.data()[i] = scale(v);
        }
    }
    return img;
}

Image8 read_png(const std::filesystem::path& path)
{
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw IngestionError("'" + path.string() + "': " + image.message);
    image.format = PNG_FORMAT_GRAY;
    Image8 img(image.height, image.width);
    if (!png_image_finish_read(&image, nullptr, img.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IngestionError("'" + path.string() + "': " + image.message);
    }
    return img;
}

} // namespace

Image8 read_image8(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path))
        throw IngestionError("cannot read image '" + path.string() + "': no such file");
    const std::string ext = lower_ext(path);
    if (ext == ".png")
        return read_png(path);
    if (ext == ".pgm" || ext == ".pnm")
        return read_pgm(path);
    throw IngestionError("unsupported image format '" + path.string() + "' (expected .png or .pgm)");
}

void write_image8(const std::filesystem::path& path, const Image8& pixels)
{
    if (lower_ext(path) == ".png") {
        png_image image{};
        image.version = PNG_IMAGE_VERSION;
        image.width = static_cast<png_uint_32>(pixels.cols());
        image.height = static_cast<png_uint_32>(pixels.rows());
        image.format = PNG_FORMAT_GRAY;
        if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr))
            throw IngestionError("cannot write '" + path.string() + "': " + image.message);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IngestionError("cannot write '" + path.string() + "'");
    out << "P5\n" << pixels.cols() << ' ' << pixels.rows() << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

GrayImage to_gray(const Image8& pixels)
{
    return pixels.cast<float>() / 255.0f;
}

Image8 to_image8(const GrayImage& image)
{
    return (image.max(0.0f).min(1.0f) * 255.0f).round().cast<std::uint8_t>();
}

Image8 mask_to_image8(const BinaryMask& mask)
{
    return (mask > 0).select(Image8::Constant(mask.rows(), mask.cols(), 255), Image8::Zero(mask.rows(), mask.cols()));
}

GrayImage resize_bilinear(const GrayImage& src, Index rows, Index cols)
{
    if (src.rows() == rows && src.cols() == cols)
        return src;
    GrayImage out(rows, cols);
    const double sy = static_cast<double>(src.rows()) / static_cast<double>(rows);
    const double sx = static_cast<double>(src.cols()) / static_cast<double>(cols);
    for (Index y = 0; y < rows; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.rows() - 1));
        const Index y0 = static_cast<Index>(fy);
        const Index y1 = std::min<Index>(y0 + 1, src.rows() - 1);
        const double wy = fy - static_cast<double>(y0);
        for (Index x = 0; x < cols; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.cols() - 1));
            const Index x0 = static_cast<Index>(fx);
            const Index x1 = std::min<Index>(x0 + 1, src.cols() - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
            const double bottom = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
            out(y, x) = static_cast<float>((1 - wy) * top + wy * bottom);
        }
    }
    return out;
}

} // namespace lcps
