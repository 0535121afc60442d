#include "lcps/engine/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace lcps {

std::string_view routing_name(Routing r)
{
    switch (r) {
    case Routing::oracle:
        return "oracle";
    case Routing::lda:
        return "lda";
    case Routing::none:
        return "none";
    }
    return "?";
}

Routing parse_routing(std::string_view name)
{
    for (Routing r : {Routing::oracle, Routing::lda, Routing::none})
        if (routing_name(r) == name)
            return r;
    throw ConfigError("unknown routing '" + std::string(name) + "' (expected oracle, lda or none)");
}

MetricsMatrix::MetricsMatrix(std::vector<std::string> tasks, std::vector<Routing> routings)
    : tasks_(std::move(tasks)), routings_(std::move(routings)), steps_(tasks_.size())
{
    if (tasks_.empty() || routings_.empty())
        throw ConfigError("metrics: need at least one task and one routing");
    values_.assign(routings_.size(), std::vector<std::optional<double>>(steps_ * tasks_.size()));
    accuracy_.assign(steps_, std::nullopt);
}

std::size_t MetricsMatrix::slot(Routing r) const
{
    const auto it = std::find(routings_.begin(), routings_.end(), r);
    if (it == routings_.end())
        throw LookupError("metrics: routing '" + std::string(routing_name(r)) + "' is not recorded");
    return static_cast<std::size_t>(it - routings_.begin());
}

std::size_t MetricsMatrix::cell(std::size_t step, std::size_t task) const
{
    if (step >= steps_ || task > step)
        throw LookupError("metrics: entry (step " + std::to_string(step + 1) + ", task " + std::to_string(task + 1)
                          + ") is outside the lower triangle");
    return step * tasks_.size() + task;
}

void MetricsMatrix::set(Routing r, std::size_t step, std::size_t task, double miou)
{
    if (!(miou >= 0.0 && miou <= 1.0))
        throw NumericError("metrics: mIoU " + std::to_string(miou) + " outside [0, 1]");
    values_[slot(r)][cell(step, task)] = miou;
}

bool MetricsMatrix::defined(Routing r, std::size_t step, std::size_t task) const
{
    if (step >= steps_ || task > step || std::find(routings_.begin(), routings_.end(), r) == routings_.end())
        return false;
    return values_[slot(r)][cell(step, task)].has_value();
}

double MetricsMatrix::at(Routing r, std::size_t step, std::size_t task) const
{
    const auto& v = values_[slot(r)][cell(step, task)];
    if (!v)
        throw LookupError("metrics: entry (step " + std::to_string(step + 1) + ", task " + std::to_string(task + 1)
                          + ") has not been recorded");
    return *v;
}

double MetricsMatrix::average(Routing r, std::size_t step) const
{
    double sum = 0.0;
    for (std::size_t t = 0; t <= step; ++t)
        sum += at(r, step, t);
    return sum / static_cast<double>(step + 1);
}

void MetricsMatrix::set_accuracy(std::size_t step, double accuracy)
{
    if (step >= steps_)
        throw LookupError("metrics: no step " + std::to_string(step + 1));
    accuracy_[step] = accuracy;
}

std::optional<double> MetricsMatrix::accuracy(std::size_t step) const
{
    if (step >= steps_)
        throw LookupError("metrics: no step " + std::to_string(step + 1));
    return accuracy_[step];
}

namespace {

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

void MetricsMatrix::write_csv(std::ostream& os) const
{
    os << "step,task,miou,routing,task_id_accuracy\n";
    for (std::size_t s = 0; s < steps_; ++s) {
        for (Routing r : routings_) {
            if (!defined(r, s, s))
                continue;
            const std::string acc = r == Routing::lda && accuracy_[s] ? fmt(*accuracy_[s]) : "";
            for (std::size_t t = 0; t <= s; ++t)
                os << s + 1 << ',' << tasks_[t] << ',' << fmt(at(r, s, t)) << ',' << routing_name(r) << ',' << acc
                   << '\n';
            os << s + 1 << ",mean," << fmt(average(r, s)) << ',' << routing_name(r) << ',' << acc << '\n';
        }
    }
}

std::string MetricsMatrix::csv() const
{
    std::ostringstream os;
    write_csv(os);
    return os.str();
}

} // namespace lcps
