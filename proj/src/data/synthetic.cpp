#include "lcps/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace lcps {

namespace {

constexpr std::array<std::string_view, 5> kNames{"scratches", "patches", "inclusions", "blowholes", "cracks"};

constexpr double kMinCoverage = 0.005;
constexpr double kMaxCoverage = 0.20;

struct Material {
    double level;
    double smooth_amplitude;
    double smooth_cell; // in units of side/64 pixels
    double grain;
};

Material material(SyntheticKind kind)
{
    switch (kind) {
    case SyntheticKind::scratches:
        return {0.38, 0.05, 16.0, 0.025};
    case SyntheticKind::patches:
        return {0.62, 0.08, 8.0, 0.02};
    case SyntheticKind::inclusions:
        return {0.50, 0.03, 16.0, 0.06};
    case SyntheticKind::blowholes:
        return {0.72, 0.05, 12.0, 0.03};
    case SyntheticKind::cracks:
        return {0.22, 0.07, 12.0, 0.02};
    }
    return {0.5, 0.05, 16.0, 0.03};
}

// Bilinearly interpolated lattice noise in [-1, 1].
GrayImage value_noise(Index side, double cell, Rng& rng)
{
    const Index nodes = static_cast<Index>(std::ceil(static_cast<double>(side) / cell)) + 2;
    Eigen::ArrayXXd lattice(nodes, nodes);
    for (Index i = 0; i < lattice.size(); ++i)
        lattice.data()[i] = uniform(rng, -1.0, 1.0);
    GrayImage out(side, side);
    for (Index y = 0; y < side; ++y) {
        const double fy = static_cast<double>(y) / cell;
        const Index y0 = static_cast<Index>(fy);
        const double ty = fy - static_cast<double>(y0);
        const double sy = ty * ty * (3 - 2 * ty);
        for (Index x = 0; x < side; ++x) {
            const double fx = static_cast<double>(x) / cell;
            const Index x0 = static_cast<Index>(fx);
            const double tx = fx - static_cast<double>(x0);
            const double sx = tx * tx * (3 - 2 * tx);
            const double top = (1 - sx) * lattice(y0, x0) + sx * lattice(y0, x0 + 1);
            const double bottom = (1 - sx) * lattice(y0 + 1, x0) + sx * lattice(y0 + 1, x0 + 1);
            out(y, x) = static_cast<float>((1 - sy) * top + sy * bottom);
        }
    }
    return out;
}

GrayImage background(SyntheticKind kind, Index side, Rng& rng)
{
    const Material m = material(kind);
    const double scale = static_cast<double>(side) / 64.0;
    const double level = m.level + uniform(rng, -0.03, 0.03);
    GrayImage img = value_noise(side, std::max(2.0, m.smooth_cell * scale), rng) * static_cast<float>(m.smooth_amplitude);
    img += static_cast<float>(level);
    for (Index i = 0; i < img.size(); ++i)
        img.data()[i] += static_cast<float>(uniform(rng, -m.grain, m.grain));
    if (kind == SyntheticKind::patches) {
        // fibrous horizontal striation
        const double period = uniform(rng, 5.0, 9.0) * scale;
        const double phase = uniform(rng, 0.0, 2 * std::numbers::pi);
        for (Index y = 0; y < side; ++y)
            img.row(y) += static_cast<float>(0.03 * std::sin(2 * std::numbers::pi * y / period + phase));
    }
    return img;
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by)
{
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

void stamp_segment(BinaryMask& mask, double ax, double ay, double bx, double by, double half_width)
{
    const Index side = mask.rows();
    const Index x_lo = std::max<Index>(0, static_cast<Index>(std::floor(std::min(ax, bx) - half_width - 1)));
    const Index x_hi = std::min<Index>(side - 1, static_cast<Index>(std::ceil(std::max(ax, bx) + half_width + 1)));
    const Index y_lo = std::max<Index>(0, static_cast<Index>(std::floor(std::min(ay, by) - half_width - 1)));
    const Index y_hi = std::min<Index>(side - 1, static_cast<Index>(std::ceil(std::max(ay, by) + half_width + 1)));
    for (Index y = y_lo; y <= y_hi; ++y)
        for (Index x = x_lo; x <= x_hi; ++x)
            if (segment_distance(x + 0.5, y + 0.5, ax, ay, bx, by) <= half_width)
                mask(y, x) = 1;
}

void stamp_ellipse(BinaryMask& mask, double cx, double cy, double a, double b, double angle, double wobble,
                   double wobble_phase)
{
    const Index side = mask.rows();
    const double c = std::cos(angle), s = std::sin(angle);
    const double reach = std::max(a, b) * (1 + wobble) + 1;
    for (Index y = std::max<Index>(0, static_cast<Index>(cy - reach));
         y <= std::min<Index>(side - 1, static_cast<Index>(cy + reach)); ++y)
        for (Index x = std::max<Index>(0, static_cast<Index>(cx - reach));
             x <= std::min<Index>(side - 1, static_cast<Index>(cx + reach)); ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double u = (c * dx + s * dy) / a;
            const double v = (-s * dx + c * dy) / b;
            const double theta = std::atan2(v, u);
            const double limit = 1.0 + wobble * std::sin(3 * theta + wobble_phase);
            if (u * u + v * v <= limit * limit)
                mask(y, x) = 1;
        }
}

BinaryMask defect_shape(SyntheticKind kind, Index side, Rng& rng)
{
    const double s = static_cast<double>(side) / 64.0;
    const double margin = 4 * s;
    auto coord = [&] { return uniform(rng, margin, side - margin); };
    BinaryMask mask = BinaryMask::Zero(side, side);
    switch (kind) {
    case SyntheticKind::scratches: {
        const long count = uniform_int(rng, 1, 3);
        for (long k = 0; k < count; ++k) {
            const double len = uniform(rng, 0.3, 0.7) * side;
            const double ang = uniform(rng, 0.0, std::numbers::pi);
            const double cx = coord(), cy = coord();
            stamp_segment(mask, cx - 0.5 * len * std::cos(ang), cy - 0.5 * len * std::sin(ang),
                          cx + 0.5 * len * std::cos(ang), cy + 0.5 * len * std::sin(ang), std::max(0.75, 0.9 * s));
        }
        break;
    }
    case SyntheticKind::patches: {
        const long count = uniform_int(rng, 1, 2);
        for (long k = 0; k < count; ++k) {
            const double a = uniform(rng, 0.07, 0.15) * side;
            const double b = a * uniform(rng, 0.6, 1.0);
            stamp_ellipse(mask, coord(), coord(), a, b, uniform(rng, 0, std::numbers::pi), 0.2,
                          uniform(rng, 0, 2 * std::numbers::pi));
        }
        break;
    }
    case SyntheticKind::inclusions: {
        const long count = uniform_int(rng, 2, 5);
        for (long k = 0; k < count; ++k) {
            const double a = uniform(rng, 0.05, 0.11) * side;
            const double b = std::max(0.9, uniform(rng, 0.015, 0.03) * side);
            stamp_ellipse(mask, coord(), coord(), a, b, uniform(rng, 0, std::numbers::pi), 0.0, 0.0);
        }
        break;
    }
    case SyntheticKind::blowholes: {
        const long count = uniform_int(rng, 1, 4);
        for (long k = 0; k < count; ++k) {
            const double r = uniform(rng, 0.035, 0.07) * side;
            stamp_ellipse(mask, coord(), coord(), r, r, 0.0, 0.0, 0.0);
        }
        break;
    }
    case SyntheticKind::cracks: {
        double x = coord(), y = coord();
        double dir = uniform(rng, 0, 2 * std::numbers::pi);
        const long steps = uniform_int(rng, 14, 28);
        std::vector<std::array<double, 3>> branch_points;
        for (long k = 0; k < steps; ++k) {
            dir += uniform(rng, -0.5, 0.5);
            const double nx = std::clamp(x + 2.0 * s * std::cos(dir), 1.0, side - 1.0);
            const double ny = std::clamp(y + 2.0 * s * std::sin(dir), 1.0, side - 1.0);
            stamp_segment(mask, x, y, nx, ny, std::max(0.7, 0.8 * s));
            x = nx;
            y = ny;
            if (k % 9 == 4)
                branch_points.push_back({x, y, dir + (uniform(rng, 0, 1) < 0.5 ? 1.0 : -1.0)});
        }
        for (auto [bx, by, bdir] : branch_points) {
            const long bsteps = uniform_int(rng, 4, 9);
            for (long k = 0; k < bsteps; ++k) {
                bdir += uniform(rng, -0.4, 0.4);
                const double nx = std::clamp(bx + 2.0 * s * std::cos(bdir), 1.0, side - 1.0);
                const double ny = std::clamp(by + 2.0 * s * std::sin(bdir), 1.0, side - 1.0);
                stamp_segment(mask, bx, by, nx, ny, std::max(0.6, 0.7 * s));
                bx = nx;
                by = ny;
            }
        }
        break;
    }
    }
    return mask;
}

void paint_defect(SyntheticKind kind, GrayImage& img, const BinaryMask& mask, Rng& rng)
{
    const Index side = img.rows();
    switch (kind) {
    case SyntheticKind::scratches: {
        const float lift = static_cast<float>(uniform(rng, 0.30, 0.40));
        img += mask.cast<float>() * lift;
        break;
    }
    case SyntheticKind::patches: {
        const float drop = static_cast<float>(uniform(rng, 0.28, 0.36));
        img -= mask.cast<float>() * drop;
        break;
    }
    case SyntheticKind::inclusions: {
        const float drop = static_cast<float>(uniform(rng, 0.30, 0.40));
        img -= mask.cast<float>() * drop;
        break;
    }
    case SyntheticKind::blowholes: {
        const float drop = static_cast<float>(uniform(rng, 0.35, 0.45));
        // bright rim just outside each hole; the rim is not part of the defect
        for (Index y = 1; y + 1 < side; ++y)
            for (Index x = 1; x + 1 < side; ++x)
                if (!mask(y, x) && (mask(y - 1, x) || mask(y + 1, x) || mask(y, x - 1) || mask(y, x + 1)))
                    img(y, x) += 0.12f;
        img -= mask.cast<float>() * drop;
        break;
    }
    case SyntheticKind::cracks: {
        const float drop = static_cast<float>(uniform(rng, 0.28, 0.36));
        img -= mask.cast<float>() * drop;
        break;
    }
    }
}

} // namespace

std::string_view kind_name(SyntheticKind kind)
{
    return kNames[static_cast<std::size_t>(kind)];
}

SyntheticKind parse_kind(std::string_view name)
{
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == name)
            return static_cast<SyntheticKind>(i);
    throw ConfigError("unknown defect kind '" + std::string(name)
                      + "' (expected scratches, patches, inclusions, blowholes or cracks)");
}

std::vector<SyntheticKind> all_kinds()
{
    return {SyntheticKind::scratches, SyntheticKind::patches, SyntheticKind::inclusions, SyntheticKind::blowholes,
            SyntheticKind::cracks};
}

ImageSample render_sample(SyntheticKind kind, Index side, Rng& rng, std::string id)
{
    ImageSample sample;
    sample.id = std::move(id);
    const double pixels = static_cast<double>(side * side);
    for (;;) {
        sample.mask = defect_shape(kind, side, rng);
        const double coverage = static_cast<double>(sample.mask.cast<int>().sum()) / pixels;
        if (coverage >= kMinCoverage && coverage <= kMaxCoverage)
            break;
    }
    sample.image = background(kind, side, rng);
    paint_defect(kind, sample.image, sample.mask, rng);
    sample.image = sample.image.max(0.0f).min(1.0f);
    return sample;
}

TaskDataset generate_task(SyntheticKind kind, int n, Index side, std::uint64_t seed, double train_fraction)
{
    if (n < 2)
        throw ConfigError("generate: need at least 2 samples, got " + std::to_string(n));
    if (side < 16 || side % 2 != 0)
        throw ConfigError("generate: side must be an even number >= 16, got " + std::to_string(side));
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("generate: train fraction must lie in (0, 1)");
    TaskDataset task;
    task.name = std::string(kind_name(kind));
    Rng rng = make_rng(seed, "data", static_cast<std::uint64_t>(kind));
    const int n_train = std::clamp(static_cast<int>(std::floor(train_fraction * n)), 1, n - 1);
    for (int i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "_%04d", i);
        ImageSample s = render_sample(kind, side, rng, task.name + buf);
        (i < n_train ? task.train : task.test).push_back(std::move(s));
    }
    return task;
}

} // namespace lcps
