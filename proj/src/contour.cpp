#include "stoplab/contour.hpp"

#include <map>
#include <stdexcept>
#include <utility>

namespace stoplab {

namespace {

// Edge ids: horizontal edge (ix, iy) -> (ix, iy)-(ix+1, iy); vertical edge
// (ix, iy) -> (ix, iy)-(ix, iy+1).
struct EdgeId {
  int ix, iy;
  bool horizontal;
  auto operator<=>(const EdgeId&) const = default;
};

}  // namespace

std::vector<Polyline> marching_squares(const Eigen::MatrixXd& values, const std::vector<double>& xs,
                                       const std::vector<double>& ys, double level) {
  const int ny = static_cast<int>(values.rows());
  const int nx = static_cast<int>(values.cols());
  if (static_cast<int>(xs.size()) != nx || static_cast<int>(ys.size()) != ny) {
    throw std::invalid_argument("marching_squares: axis lengths do not match the grid");
  }
  if (nx < 2 || ny < 2) return {};

  auto above = [&](int ix, int iy) { return values(iy, ix) > level; };
  auto crossing = [&](const EdgeId& e) {
    const int ix2 = e.horizontal ? e.ix + 1 : e.ix;
    const int iy2 = e.horizontal ? e.iy : e.iy + 1;
    const double v1 = values(e.iy, e.ix), v2 = values(iy2, ix2);
    const double f = (v1 == v2) ? 0.5 : (level - v1) / (v2 - v1);
    return Vertex{xs[static_cast<std::size_t>(e.ix)] + f * (xs[static_cast<std::size_t>(ix2)] - xs[static_cast<std::size_t>(e.ix)]),
                  ys[static_cast<std::size_t>(e.iy)] + f * (ys[static_cast<std::size_t>(iy2)] - ys[static_cast<std::size_t>(e.iy)])};
  };

  std::vector<std::pair<EdgeId, EdgeId>> segments;
  for (int iy = 0; iy + 1 < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      // Corners counter-clockwise from bottom-left.
      const int code = (above(ix, iy) ? 1 : 0) | (above(ix + 1, iy) ? 2 : 0) | (above(ix + 1, iy + 1) ? 4 : 0) |
                       (above(ix, iy + 1) ? 8 : 0);
      if (code == 0 || code == 15) continue;
      const EdgeId bottom{ix, iy, true}, top{ix, iy + 1, true}, left{ix, iy, false}, right{ix + 1, iy, false};
      switch (code) {
        case 1: case 14: segments.emplace_back(left, bottom); break;
        case 2: case 13: segments.emplace_back(bottom, right); break;
        case 3: case 12: segments.emplace_back(left, right); break;
        case 4: case 11: segments.emplace_back(right, top); break;
        case 6: case 9: segments.emplace_back(bottom, top); break;
        case 7: case 8: segments.emplace_back(left, top); break;
        case 5: case 10: {
          const double centre =
              0.25 * (values(iy, ix) + values(iy, ix + 1) + values(iy + 1, ix + 1) + values(iy + 1, ix));
          const bool centre_above = centre > level;
          // code 5: bottom-left and top-right above.
          if ((code == 5) == centre_above) {
            segments.emplace_back(left, top);
            segments.emplace_back(bottom, right);
          } else {
            segments.emplace_back(left, bottom);
            segments.emplace_back(right, top);
          }
          break;
        }
        default: break;
      }
    }
  }

  // Every interior crossing joins exactly two segments.
  std::map<EdgeId, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].first].push_back(s);
    incident[segments[s].second].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> lines;

  auto walk = [&](std::size_t start_seg, const EdgeId& start_edge) {
    Polyline line{crossing(start_edge)};
    EdgeId at = start_edge;
    std::size_t seg = start_seg;
    while (true) {
      used[seg] = true;
      const EdgeId next = segments[seg].first == at ? segments[seg].second : segments[seg].first;
      line.push_back(crossing(next));
      at = next;
      std::size_t follow = segments.size();
      for (auto cand : incident[at]) {
        if (!used[cand]) {
          follow = cand;
          break;
        }
      }
      if (follow == segments.size()) break;
      seg = follow;
    }
    lines.push_back(std::move(line));
  };

  // Open lines start at boundary crossings (one incident segment).
  for (const auto& [edge, segs] : incident) {
    if (segs.size() == 1 && !used[segs[0]]) walk(segs[0], edge);
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) walk(s, segments[s].first);
  }
  return lines;
}

}  // namespace stoplab
