#pragma once

#include "lcps/core/errors.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lcps {

/// How a test image picks its segmentation path. `none` is used by baselines that
/// have a single shared network.
enum class Routing { oracle, lda, none };

std::string_view routing_name(Routing r);
Routing parse_routing(std::string_view name);

/// mIoU of every task after every incremental step, per routing mode. Entry
/// (step, task) exists only for task <= step. Steps and tasks are 0-based here and
/// 1-based in the CSV.
class MetricsMatrix {
public:
    MetricsMatrix() = default;
    MetricsMatrix(std::vector<std::string> tasks, std::vector<Routing> routings);

    const std::vector<std::string>& tasks() const { return tasks_; }
    const std::vector<Routing>& routings() const { return routings_; }
    std::size_t steps() const { return steps_; }

    void set(Routing r, std::size_t step, std::size_t task, double miou);
    bool defined(Routing r, std::size_t step, std::size_t task) const;
    double at(Routing r, std::size_t step, std::size_t task) const;
    /// Mean over the tasks seen up to `step`.
    double average(Routing r, std::size_t step) const;

    void set_accuracy(std::size_t step, double accuracy);
    std::optional<double> accuracy(std::size_t step) const;

    /// Columns step,task,miou,routing,task_id_accuracy; after each step's task rows
    /// comes a `mean` row per routing.
    void write_csv(std::ostream& os) const;
    std::string csv() const;

    bool operator==(const MetricsMatrix&) const = default;

private:
    std::size_t slot(Routing r) const;
    std::size_t cell(std::size_t step, std::size_t task) const;

    std::vector<std::string> tasks_;
    std::vector<Routing> routings_;
    std::size_t steps_ = 0;
    // [routing][step * tasks + task], nullopt where undefined.
    std::vector<std::vector<std::optional<double>>> values_;
    std::vector<std::optional<double>> accuracy_;
};

} // namespace lcps
