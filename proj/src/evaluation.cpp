#include "stoplab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "stoplab/smdp.hpp"

namespace stoplab {

Eigen::MatrixXd StopModel::q_values(const Eigen::MatrixXd& states) const {
  if (augmented()) {
    throw std::invalid_argument("this model reads states augmented with the cumulative gain; evaluate it along paths");
  }
  return q_net.forward(states).heads.at(0);
}

Eigen::MatrixXd StopModel::q_values_path(const Eigen::MatrixXd& path_states) const {
  if (!augmented()) return q_values(path_states);
  if (path_states.rows() != state_dim()) throw std::invalid_argument("q_values_path: state width mismatch");
  const Eigen::MatrixXd g = g_net->forward(path_states).heads.at(0);
  Eigen::MatrixXd aug(path_states.rows() + 1, path_states.cols());
  aug.topRows(path_states.rows()) = path_states;
  double y = 0.0;
  for (Eigen::Index t = 0; t < path_states.cols(); ++t) {
    y = y_update(y, g(0, t), static_cast<int>(t), gamma);
    aug(path_states.rows(), t) = y;
  }
  return q_net.forward(aug).heads.at(0);
}

namespace {

std::vector<bool> greedy(const Eigen::MatrixXd& q) {
  std::vector<bool> out(static_cast<std::size_t>(q.cols()));
  for (Eigen::Index i = 0; i < q.cols(); ++i) out[static_cast<std::size_t>(i)] = stop_decision({q(0, i), q(1, i)});
  return out;
}

}  // namespace

std::vector<bool> recover_region(const StopModel& model, const Eigen::MatrixXd& states) {
  return greedy(model.q_values(states));
}

std::vector<bool> recover_path(const StopModel& model, const Eigen::MatrixXd& path_states) {
  return greedy(model.q_values_path(path_states));
}

std::optional<int> first_stop(const std::vector<bool>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

double Confusion::tpr() const { return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
double Confusion::tnr() const { return tn + fp > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0; }

Confusion confusion(const std::vector<bool>& predicted_stop, const std::vector<bool>& expert_stop) {
  if (predicted_stop.empty()) throw std::invalid_argument("balanced accuracy of an empty set");
  if (predicted_stop.size() != expert_stop.size()) throw std::invalid_argument("prediction/label length mismatch");
  Confusion c;
  for (std::size_t i = 0; i < predicted_stop.size(); ++i) {
    if (expert_stop[i]) {
      predicted_stop[i] ? ++c.tp : ++c.fn;
    } else {
      predicted_stop[i] ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double balanced_accuracy(const std::vector<bool>& predicted_stop, const std::vector<bool>& expert_stop) {
  return confusion(predicted_stop, expert_stop).balanced_accuracy();
}

Tradeoff tradeoff_metrics(const std::vector<std::optional<int>>& reference,
                          const std::vector<std::optional<int>>& predicted) {
  if (reference.size() != predicted.size()) throw std::invalid_argument("tradeoff: one prediction per path");
  long with_ref = 0, misses = 0;
  double lead = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (!reference[i]) continue;
    ++with_ref;
    if (!predicted[i] || *predicted[i] > *reference[i]) {
      ++misses;
    } else {
      lead += *reference[i] - *predicted[i];
    }
  }
  Tradeoff out;
  if (with_ref == 0) return out;
  out.m_emr = static_cast<double>(misses) / static_cast<double>(with_ref);
  if (with_ref > misses) out.m_tte = lead / static_cast<double>(with_ref - misses);
  return out;
}

std::vector<EvalPath> build_eval_set(const LabeledPaths& lp, const FeatureMap& features) {
  std::vector<EvalPath> out;
  out.reserve(lp.paths.size());
  for (std::size_t p = 0; p < lp.paths.size(); ++p) {
    const auto& path = lp.paths[p];
    EvalPath e;
    const std::size_t d = path.states.empty() ? 0 : features.dim(path.states.front().dim());
    e.states.resize(static_cast<Eigen::Index>(d), path.length());
    for (int t = 0; t < path.length(); ++t) {
      const auto f = features(path.states[static_cast<std::size_t>(t)], t);
      for (std::size_t j = 0; j < d; ++j) e.states(static_cast<Eigen::Index>(j), t) = f[j];
    }
    e.n_labeled = lp.labels[p].n_labeled;
    e.tau = lp.labels[p].tau;
    e.reference = lp.labels[p].tau;
    out.push_back(std::move(e));
  }
  return out;
}

EvalReport evaluate(const StopModel& model, const std::vector<EvalPath>& paths, EvalMode mode) {
  std::vector<std::vector<bool>> labels(paths.size());
  const auto n = static_cast<long>(paths.size());
  if (mode == EvalMode::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long p = 0; p < n; ++p) {
      labels[static_cast<std::size_t>(p)] = recover_path(model, paths[static_cast<std::size_t>(p)].states);
    }
  } else {
    for (long p = 0; p < n; ++p) {
      labels[static_cast<std::size_t>(p)] = recover_path(model, paths[static_cast<std::size_t>(p)].states);
    }
  }
  std::vector<bool> pred, truth;
  EvalReport rep;
  std::vector<std::optional<int>> refs;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& e = paths[p];
    for (int t = 0; t < e.n_labeled; ++t) {
      pred.push_back(labels[p][static_cast<std::size_t>(t)]);
      truth.push_back(e.tau && *e.tau == t);
    }
    rep.predicted_tau.push_back(first_stop(labels[p]));
    refs.push_back(e.reference);
  }
  rep.counts = confusion(pred, truth);
  rep.balanced_accuracy = rep.counts.balanced_accuracy();
  rep.tradeoff = tradeoff_metrics(refs, rep.predicted_tau);
  return rep;
}

std::vector<double> GridSpec::xs() const {
  std::vector<double> v(static_cast<std::size_t>(nx));
  for (int i = 0; i < nx; ++i) v[static_cast<std::size_t>(i)] = x_min + (x_max - x_min) * i / (nx - 1);
  return v;
}

std::vector<double> GridSpec::ys() const {
  std::vector<double> v(static_cast<std::size_t>(ny));
  for (int i = 0; i < ny; ++i) v[static_cast<std::size_t>(i)] = y_min + (y_max - y_min) * i / (ny - 1);
  return v;
}

namespace {

Eigen::MatrixXd grid_row_inputs(const GridSpec& grid, int input_dim, int t, double y_coord,
                                const std::vector<double>& xs) {
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(input_dim, grid.nx);
  for (int ix = 0; ix < grid.nx; ++ix) {
    int r = 0;
    in(r++, ix) = xs[static_cast<std::size_t>(ix)];
    in(r++, ix) = y_coord;
    if (grid.time_feature) in(r++, ix) = static_cast<double>(t) / grid.horizon;
    if (r < input_dim) in(r, ix) = grid.y_value;
  }
  return in;
}

}  // namespace

std::vector<SurfaceSlice> export_surfaces(const QFunction& q, int input_dim, const GridSpec& grid,
                                          const std::vector<int>& times, EvalMode mode) {
  const int expected = 2 + (grid.time_feature ? 1 : 0);
  if (input_dim != expected && input_dim != expected + 1) {
    throw std::invalid_argument("export_surfaces needs a two-dimensional state space (model input width " +
                                std::to_string(input_dim) + ")");
  }
  if (grid.nx < 2 || grid.ny < 2) throw std::invalid_argument("export_surfaces: grid needs at least 2x2 nodes");
  const auto xs = grid.xs();
  const auto ys = grid.ys();
  std::vector<SurfaceSlice> out;
  for (int t : times) {
    SurfaceSlice s;
    s.t = t;
    s.q_stop.resize(grid.ny, grid.nx);
    s.q_continue.resize(grid.ny, grid.nx);
    auto row = [&](int iy) {
      const Eigen::MatrixXd qv = q(grid_row_inputs(grid, input_dim, t, ys[static_cast<std::size_t>(iy)], xs));
      s.q_stop.row(iy) = qv.row(0);
      s.q_continue.row(iy) = qv.row(1);
    };
    if (mode == EvalMode::Parallel) {
#pragma omp parallel for schedule(static)
      for (int iy = 0; iy < grid.ny; ++iy) row(iy);
    } else {
      for (int iy = 0; iy < grid.ny; ++iy) row(iy);
    }
    if (grid.normalize) {
      const double scale = std::max(s.q_stop.cwiseAbs().maxCoeff(), s.q_continue.cwiseAbs().maxCoeff());
      if (scale > 0.0) {
        s.q_stop /= scale;
        s.q_continue /= scale;
      }
    }
    s.diff = s.q_stop - s.q_continue;
    s.boundary = marching_squares(s.diff, xs, ys, 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SurfaceSlice> export_surfaces(const StopModel& model, const GridSpec& grid, const std::vector<int>& times,
                                          EvalMode mode) {
  QFunction q = [&model](const Eigen::MatrixXd& in) { return model.q_net.forward(in).heads.at(0); };
  const int width = model.q_net.config().input_dim;
  const int bare = 2 + (grid.time_feature ? 1 : 0);
  if (width != bare + (model.augmented() ? 1 : 0)) {
    throw std::invalid_argument("export_surfaces needs a two-dimensional state space (model input width " +
                                std::to_string(width) + ")");
  }
  return export_surfaces(q, width, grid, times, mode);
}

void write_surface_csv(std::ostream& os, const SurfaceSlice& slice, const GridSpec& grid) {
  const auto xs = grid.xs();
  const auto ys = grid.ys();
  os << "t,x,y,q_stop,q_continue,q_diff\n" << std::setprecision(10);
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      os << slice.t << ',' << xs[static_cast<std::size_t>(ix)] << ',' << ys[static_cast<std::size_t>(iy)] << ','
         << slice.q_stop(iy, ix) << ',' << slice.q_continue(iy, ix) << ',' << slice.diff(iy, ix) << '\n';
    }
  }
}

void write_boundaries_csv(std::ostream& os, const std::vector<SurfaceSlice>& slices) {
  os << "t,polyline,vertex,x,y\n" << std::setprecision(10);
  for (const auto& s : slices) {
    for (std::size_t l = 0; l < s.boundary.size(); ++l) {
      for (std::size_t v = 0; v < s.boundary[l].size(); ++v) {
        os << s.t << ',' << l << ',' << v << ',' << s.boundary[l][v].x << ',' << s.boundary[l][v].y << '\n';
      }
    }
  }
}

}  // namespace stoplab
