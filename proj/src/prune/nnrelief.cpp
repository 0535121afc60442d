#include "lcps/prune/nnrelief.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace lcps {

std::vector<std::size_t> select_keep_set(std::span<const double> scores, double alpha)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    if (order.empty())
        return {};
    // The prefix may fall short of alpha by rounding; the whole filter is then kept.
    double threshold = scores[order.back()];
    double cumulative = 0.0;
    for (std::size_t p = 0; p < order.size(); ++p) {
        cumulative += scores[order[p]];
        if (cumulative >= alpha) {
            threshold = scores[order[p]];
            break;
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (!(scores[i] < threshold))
            keep.push_back(i);
    return keep;
}

void write_importance_csv(std::ostream& os, std::span<const LayerImportance> tables)
{
    os << "layer,filter,kernel,score\n";
    for (const auto& t : tables)
        for (std::size_t j = 0; j < t.filters.size(); ++j)
            for (std::size_t i = 0; i < t.filters[j].scores.size(); ++i)
                os << t.layer << ',' << j << ',' << i << ',' << t.filters[j].scores[i] << '\n';
}

} // namespace lcps
