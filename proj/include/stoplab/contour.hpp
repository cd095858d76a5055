#pragma once

#include <vector>

#include <Eigen/Dense>

namespace stoplab {

struct Vertex {
  double x = 0.0;
  double y = 0.0;
};

using Polyline = std::vector<Vertex>;

/// Level-`level` contour of values(iy, ix) sampled at (xs[ix], ys[iy]).
/// Crossings are linearly interpolated along cell edges; saddle cells are
/// resolved with the cell-centre average. Segments are joined into maximal
/// polylines; closed loops repeat their first vertex at the end.
std::vector<Polyline> marching_squares(const Eigen::MatrixXd& values, const std::vector<double>& xs,
                                       const std::vector<double>& ys, double level = 0.0);

}  // namespace stoplab
