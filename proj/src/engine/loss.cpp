#include "lcps/engine/loss.hpp"

namespace lcps {

double iou_score(const BinaryMask& predicted, const BinaryMask& truth)
{
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols())
        throw DimensionError("iou: mask shapes differ");
    const auto p = predicted > 0;
    const auto t = truth > 0;
    const Index inter = (p && t).count();
    const Index uni = (p || t).count();
    if (uni == 0)
        return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace lcps
