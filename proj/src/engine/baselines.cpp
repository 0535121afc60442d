#include "lcps/engine/baselines.hpp"

namespace lcps {

std::string_view baseline_name(BaselineKind kind)
{
    switch (kind) {
    case BaselineKind::finetune:
        return "finetune";
    case BaselineKind::joint:
        return "joint";
    case BaselineKind::single:
        return "single";
    case BaselineKind::regularized:
        return "regularized";
    }
    return "?";
}

BaselineKind parse_baseline(std::string_view name)
{
    for (BaselineKind k : {BaselineKind::finetune, BaselineKind::joint, BaselineKind::single, BaselineKind::regularized})
        if (baseline_name(k) == name)
            return k;
    throw ConfigError("unknown baseline '" + std::string(name) + "'");
}

} // namespace lcps
