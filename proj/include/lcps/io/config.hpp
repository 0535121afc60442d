#pragma once

#include "lcps/engine/continual.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lcps {

/// Resolved run settings. Serialized as flat `key = value` lines; `#` starts a
/// comment. Keys: alpha, num_iters, retrain_epochs, epochs, lr, batch_size,
/// eps_shrinkage, eps_smooth, image_size, encoder_channels, bottleneck_channels,
/// threshold, seed, task_order, lambda, reinit_free, retrain_lr,
/// importance_samples, collapse_floor, grid.
struct RunConfig {
    ContinualConfig continual;
    std::vector<std::string> task_order;
    double lambda = 0.0;
    /// Grid of the pooled-statistics extractor.
    Index grid = 4;

    static const std::vector<std::string>& keys();

    /// Throws ConfigError for unknown keys or malformed values.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;

    /// Applies every line of `text` on top of the current values.
    void merge_text(std::string_view text, const std::string& origin = "config");
    void merge_file(const std::filesystem::path& path);

    /// Every key, in keys() order, with all defaults materialized.
    std::string to_text() const;

    void validate() const;
};

/// Splits flat `key = value` text; `origin` prefixes error messages.
std::vector<std::pair<std::string, std::string>> parse_flat(std::string_view text, const std::string& origin);

/// Everything needed to reproduce a run: resolved config, method, data location,
/// artifact paths and tool version.
struct RunManifest {
    static constexpr std::string_view kToolVersion = "lcps 1.0.0";

    RunConfig config;
    std::string method = "lda-cps";
    std::string data;
    std::string tool_version{kToolVersion};
    std::map<std::string, std::string> artifacts;

    std::string to_text() const;
    static RunManifest parse(std::string_view text, const std::string& origin = "manifest");
    static RunManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

std::string format_double(double v);

} // namespace lcps
