#pragma once

#include <cmath>

namespace deihdl {

// Axis-aligned box in corner form. Coordinates are unit-agnostic (pixels or
// normalized), they only have to be consistent within one dataset. Corner
// form keeps the intersection arithmetic branch-free.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }

  /// Corners ordered and finite. Zero-area boxes are legal.
  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) &&
           std::isfinite(x_max) && std::isfinite(y_max) && x_min <= x_max &&
           y_min <= y_max;
  }
};

double box_area(const BoundingBox& b);

double intersection_area(const BoundingBox& a, const BoundingBox& b);

/// Intersection over union. A pair with zero union area yields 0, so
/// degenerate boxes never push a NaN into the fusion math.
double iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace deihdl
