#include "lcps/io/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lcps {

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const std::string item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
        if (!item.empty())
            out.push_back(item);
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text)
{
    const std::string v = trim(text);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
        throw ConfigError("config: '" + std::string(key) + "' has malformed value '" + v + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view text)
{
    const std::string v = trim(text);
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw ConfigError("config: '" + std::string(key) + "' expects true or false, got '" + v + "'");
}

template <typename C>
std::string join(const C& items)
{
    std::string out;
    for (const auto& x : items) {
        if (!out.empty())
            out += ',';
        if constexpr (std::is_arithmetic_v<std::decay_t<decltype(x)>>)
            out += std::to_string(x);
        else
            out += x;
    }
    return out;
}

} // namespace

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::pair<std::string, std::string>> parse_flat(std::string_view text, const std::string& origin)
{
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty())
            continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
        out.emplace_back(key, trim(std::string_view(body).substr(eq + 1)));
    }
    return out;
}

const std::vector<std::string>& RunConfig::keys()
{
    static const std::vector<std::string> k{
        "alpha",     "num_iters", "retrain_epochs",   "epochs",
        "lr",        "batch_size", "eps_shrinkage",   "eps_smooth",
        "image_size", "encoder_channels", "bottleneck_channels", "threshold",
        "seed",      "task_order", "lambda",           "reinit_free",
        "retrain_lr", "importance_samples", "collapse_floor", "grid"};
    return k;
}

void RunConfig::set(std::string_view key, std::string_view value)
{
    ContinualConfig& c = continual;
    if (key == "alpha")
        c.prune.alpha = parse_number<double>(key, value);
    else if (key == "num_iters")
        c.prune.num_iters = parse_number<int>(key, value);
    else if (key == "retrain_epochs")
        c.prune.retrain_epochs = parse_number<int>(key, value);
    else if (key == "epochs")
        c.train.epochs = parse_number<int>(key, value);
    else if (key == "lr")
        c.train.adam.learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size")
        c.train.batch_size = parse_number<Index>(key, value);
    else if (key == "eps_shrinkage")
        c.eps_shrinkage = parse_number<double>(key, value);
    else if (key == "eps_smooth")
        c.train.eps_smooth = parse_number<double>(key, value);
    else if (key == "image_size")
        c.unet.image_side = parse_number<Index>(key, value);
    else if (key == "encoder_channels") {
        c.unet.encoder_channels.clear();
        for (const auto& item : split_list(value))
            c.unet.encoder_channels.push_back(parse_number<Index>(key, item));
    } else if (key == "bottleneck_channels")
        c.unet.bottleneck_channels = parse_number<Index>(key, value);
    else if (key == "threshold")
        c.threshold = parse_number<double>(key, value);
    else if (key == "seed")
        c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "task_order")
        task_order = split_list(value);
    else if (key == "lambda")
        lambda = parse_number<double>(key, value);
    else if (key == "reinit_free")
        c.reinit_free = parse_bool(key, value);
    else if (key == "retrain_lr")
        c.prune.retrain_lr = parse_number<double>(key, value);
    else if (key == "importance_samples")
        c.prune.importance_samples = parse_number<int>(key, value);
    else if (key == "collapse_floor")
        c.collapse_floor = parse_number<double>(key, value);
    else if (key == "grid")
        grid = parse_number<Index>(key, value);
    else
        throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

std::string RunConfig::get(std::string_view key) const
{
    const ContinualConfig& c = continual;
    if (key == "alpha")
        return format_double(c.prune.alpha);
    if (key == "num_iters")
        return std::to_string(c.prune.num_iters);
    if (key == "retrain_epochs")
        return std::to_string(c.prune.retrain_epochs);
    if (key == "epochs")
        return std::to_string(c.train.epochs);
    if (key == "lr")
        return format_double(c.train.adam.learning_rate);
    if (key == "batch_size")
        return std::to_string(c.train.batch_size);
    if (key == "eps_shrinkage")
        return format_double(c.eps_shrinkage);
    if (key == "eps_smooth")
        return format_double(c.train.eps_smooth);
    if (key == "image_size")
        return std::to_string(c.unet.image_side);
    if (key == "encoder_channels")
        return join(c.unet.encoder_channels);
    if (key == "bottleneck_channels")
        return std::to_string(c.unet.bottleneck_channels);
    if (key == "threshold")
        return format_double(c.threshold);
    if (key == "seed")
        return std::to_string(c.seed);
    if (key == "task_order")
        return join(task_order);
    if (key == "lambda")
        return format_double(lambda);
    if (key == "reinit_free")
        return c.reinit_free ? "true" : "false";
    if (key == "retrain_lr")
        return format_double(c.prune.retrain_lr);
    if (key == "importance_samples")
        return std::to_string(c.prune.importance_samples);
    if (key == "collapse_floor")
        return format_double(c.collapse_floor);
    if (key == "grid")
        return std::to_string(grid);
    throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

void RunConfig::merge_text(std::string_view text, const std::string& origin)
{
    for (const auto& [k, v] : parse_flat(text, origin))
        set(k, v);
}

void RunConfig::merge_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
}

std::string RunConfig::to_text() const
{
    std::string out;
    for (const auto& k : keys())
        out += k + " = " + get(k) + "\n";
    return out;
}

void RunConfig::validate() const
{
    continual.validate();
    if (!(lambda >= 0.0))
        throw ConfigError("config: lambda must be non-negative");
    if (grid < 1)
        throw ConfigError("config: grid must be positive");
}

std::string RunManifest::to_text() const
{
    std::string out = "# lcps run manifest\n";
    out += "tool_version = " + tool_version + "\n";
    out += "method = " + method + "\n";
    out += "data = " + data + "\n";
    out += config.to_text();
    for (const auto& [name, path] : artifacts)
        out += "artifact." + name + " = " + path + "\n";
    return out;
}

RunManifest RunManifest::parse(std::string_view text, const std::string& origin)
{
    RunManifest m;
    m.tool_version.clear();
    for (const auto& [k, v] : parse_flat(text, origin)) {
        if (k == "tool_version")
            m.tool_version = v;
        else if (k == "method")
            m.method = v;
        else if (k == "data")
            m.data = v;
        else if (k.starts_with("artifact."))
            m.artifacts[k.substr(9)] = v;
        else
            m.config.set(k, v);
    }
    return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read manifest '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

void RunManifest::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write manifest '" + path.string() + "'");
    out << to_text();
}

} // namespace lcps
