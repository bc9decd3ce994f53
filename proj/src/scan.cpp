#include "socc/scan.hpp"

namespace socc {

Scan Scan::transformed(const Pose& T) const {
    Scan out;
    out.labels = labels;
    out.rel_times = rel_times;
    out.positions.resize(positions.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(positions.size()); ++i) {
        out.positions[i] = T * positions[i];
    }
    return out;
}

}  // namespace socc
