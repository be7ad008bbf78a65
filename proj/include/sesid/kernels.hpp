#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version (used by the library) and a
// plain serial version in `reference` that tests compare against bit for bit.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "sesid/cpl.hpp"

namespace sesid::kernels {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RegressionLayout {
  std::size_t n_hat = 1;
  std::size_t d_hat = 0;
  std::size_t lower = 1;
  std::size_t upper = 1;
  bool constant_input = false;
  double v0 = 0.0;

  std::size_t rows() const noexcept { return upper - lower + 1; }
};

struct RegressionBlocks {
  Eigen::VectorXd Y;
  RowMatrix phi_y;
  RowMatrix phi_eta;
  RowMatrix phi_v;
};

// Allocates and fills rows k = lower..upper. The caller has checked the index range.
RegressionBlocks regression_rows(std::span<const double> y, std::span<const double> v,
                                 const CplPartition& partition, const RegressionLayout& layout);

// Sum over segments of |DFT(window .* (segment - mean(segment)))|^2 for bins 0..L/2.
std::vector<double> welch_power_sum(std::span<const double> x, std::size_t segment_len,
                                    std::size_t hop, std::span<const double> window);

namespace reference {

RegressionBlocks regression_rows(std::span<const double> y, std::span<const double> v,
                                 const CplPartition& partition, const RegressionLayout& layout);

std::vector<double> welch_power_sum(std::span<const double> x, std::size_t segment_len,
                                    std::size_t hop, std::span<const double> window);

}  // namespace reference

}  // namespace sesid::kernels
