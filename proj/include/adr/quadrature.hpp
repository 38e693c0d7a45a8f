#pragma once

#include "adr/geometry.hpp"

#include <vector>

namespace adr {

/// Points live on the reference triangle {(r,s): r,s >= 0, r+s <= 1} for
/// triangle rules and on (0,1) for edge rules. Weights sum to the reference
/// measure (1/2 resp. 1).
struct QuadratureRule {
    std::vector<Vec2> points; // edge rules use only x()
    std::vector<double> weights;
    int exactness = 0;

    int size() const { return static_cast<int>(points.size()); }
};

enum class RuleKind { Triangle, Edge };

/// Rule exact for all polynomials up to the requested total degree.
/// Exactness is capped at 20; higher requests throw.
const QuadratureRule& quadrature(RuleKind kind, int exactness);

} // namespace adr
