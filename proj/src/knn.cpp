#include "stoplab/knn.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace stoplab {

double squared_distance(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

namespace {

void check_average_args(const PointCloud& pts, std::span<const double> values, int k) {
  if (values.size() != pts.n) throw std::invalid_argument("knn_average: one value per point required");
  if (k < 1 || static_cast<std::size_t>(k) > pts.n) throw std::invalid_argument("knn_average: need 1 <= k <= n");
}

double average_for(const PointCloud& pts, std::span<const double> values, int k, std::size_t i,
                   std::vector<double>& dist, std::vector<double>& scratch) {
  for (std::size_t j = 0; j < pts.n; ++j) dist[j] = squared_distance(pts.row(i), pts.row(j), pts.d);
  scratch = dist;
  auto kth = scratch.begin() + (k - 1);
  std::nth_element(scratch.begin(), kth, scratch.end());
  const double radius = *kth;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < pts.n; ++j) {
    if (dist[j] <= radius) {
      sum += values[j];
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

void check_index_args(const PointCloud& pts, int k) {
  if (k < 1 || static_cast<std::size_t>(k) >= pts.n) {
    throw std::invalid_argument("knn_indices: need 1 <= k < n");
  }
}

std::vector<std::size_t> neighbours_of(const PointCloud& pts, int k, std::size_t i,
                                       std::vector<std::pair<double, std::size_t>>& buf) {
  buf.clear();
  for (std::size_t j = 0; j < pts.n; ++j) {
    if (j == i) continue;
    buf.emplace_back(squared_distance(pts.row(i), pts.row(j), pts.d), j);
  }
  std::partial_sort(buf.begin(), buf.begin() + k, buf.end());
  std::vector<std::size_t> out(static_cast<std::size_t>(k));
  for (int m = 0; m < k; ++m) out[static_cast<std::size_t>(m)] = buf[static_cast<std::size_t>(m)].second;
  return out;
}

}  // namespace

std::vector<double> knn_average_serial(const PointCloud& pts, std::span<const double> values, int k) {
  check_average_args(pts, values, k);
  std::vector<double> out(pts.n);
  std::vector<double> dist(pts.n), scratch(pts.n);
  for (std::size_t i = 0; i < pts.n; ++i) out[i] = average_for(pts, values, k, i, dist, scratch);
  return out;
}

std::vector<double> knn_average_parallel(const PointCloud& pts, std::span<const double> values, int k) {
  check_average_args(pts, values, k);
  std::vector<double> out(pts.n);
  const auto n = static_cast<long>(pts.n);
#pragma omp parallel
  {
    std::vector<double> dist(pts.n), scratch(pts.n);
#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = average_for(pts, values, k, static_cast<std::size_t>(i), dist, scratch);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> knn_indices_serial(const PointCloud& pts, int k) {
  check_index_args(pts, k);
  std::vector<std::vector<std::size_t>> out(pts.n);
  std::vector<std::pair<double, std::size_t>> buf;
  buf.reserve(pts.n);
  for (std::size_t i = 0; i < pts.n; ++i) out[i] = neighbours_of(pts, k, i, buf);
  return out;
}

std::vector<std::vector<std::size_t>> knn_indices_parallel(const PointCloud& pts, int k) {
  check_index_args(pts, k);
  std::vector<std::vector<std::size_t>> out(pts.n);
  const auto n = static_cast<long>(pts.n);
#pragma omp parallel
  {
    std::vector<std::pair<double, std::size_t>> buf;
    buf.reserve(pts.n);
#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = neighbours_of(pts, k, static_cast<std::size_t>(i), buf);
    }
  }
  return out;
}

}  // namespace stoplab
