#pragma once

// Brute-force nearest-neighbour kernels. Each comes as a serial reference and
// an OpenMP version that must agree with it exactly; the benchmark target
// compares the two.

#include <cstddef>
#include <span>
#include <vector>

namespace stoplab {

/// Row-major n x d point cloud.
struct PointCloud {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> data;

  PointCloud() = default;
  PointCloud(std::size_t n_, std::size_t d_) : n(n_), d(d_), data(n_ * d_, 0.0) {}

  double* row(std::size_t i) { return data.data() + i * d; }
  const double* row(std::size_t i) const { return data.data() + i * d; }
};

double squared_distance(const double* a, const double* b, std::size_t d);

/// For every point, the mean of `values` over its k nearest points (itself
/// included). Points tied with the k-th distance are all included, so
/// duplicated states share one estimate.
std::vector<double> knn_average_serial(const PointCloud& pts, std::span<const double> values, int k);
std::vector<double> knn_average_parallel(const PointCloud& pts, std::span<const double> values, int k);

/// Indices of the k nearest other points of every point (self excluded),
/// nearest first, ties broken by index.
std::vector<std::vector<std::size_t>> knn_indices_serial(const PointCloud& pts, int k);
std::vector<std::vector<std::size_t>> knn_indices_parallel(const PointCloud& pts, int k);

}  // namespace stoplab
