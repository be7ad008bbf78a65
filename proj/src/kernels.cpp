#include "sesid/kernels.hpp"

#include <fftw3.h>

#include <complex>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace sesid::kernels {

namespace {

void allocate(RegressionBlocks& out, const CplPartition& partition,
              const RegressionLayout& layout) {
  const auto rows = static_cast<Eigen::Index>(layout.rows());
  const auto n = static_cast<Eigen::Index>(layout.n_hat);
  const auto p1 = static_cast<Eigen::Index>(partition.num_intervals());
  out.Y.resize(rows);
  out.phi_y.resize(rows, n);
  out.phi_eta.resize(rows, n * p1);
  out.phi_v.resize(rows, layout.constant_input ? 1 : n);
}

// Row for sample k into row `row` of the blocks.
void fill_row(std::span<const double> y, std::span<const double> v,
              const CplPartition& partition, const RegressionLayout& layout, std::size_t k,
              Eigen::Index row, RegressionBlocks& out) {
  const std::size_t n = layout.n_hat;
  const std::size_t d = layout.d_hat;
  const std::size_t p1 = partition.num_intervals();
  out.Y(row) = y[k];
  double* eta_row = out.phi_eta.row(row).data();
  for (std::size_t i = 1; i <= n; ++i) {
    const auto col = static_cast<Eigen::Index>(i - 1);
    const std::size_t j = k - i;
    out.phi_y(row, col) = y[j];
    const double yf = y[j - d] - y[j - d - 1];
    std::span<double> block(eta_row + (i - 1) * p1, p1);
    partition.eta(yf, block);
    const double gain = layout.constant_input ? layout.v0 : v[j];
    for (double& e : block) {
      e *= gain;
    }
    if (!layout.constant_input) {
      out.phi_v(row, col) = v[j];
    }
  }
  if (layout.constant_input) {
    out.phi_v(row, 0) = layout.v0;
  }
}

struct PlanDeleter {
  void operator()(fftw_plan_s* plan) const { fftw_destroy_plan(plan); }
};
struct BufferDeleter {
  void operator()(void* ptr) const { fftw_free(ptr); }
};

using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;
template <class T>
using FftwBuffer = std::unique_ptr<T[], BufferDeleter>;

template <class T>
FftwBuffer<T> fftw_buffer(std::size_t count) {
  auto* raw = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (raw == nullptr) {
    throw std::bad_alloc();
  }
  return FftwBuffer<T>(raw);
}

// Planning is not thread-safe in FFTW; plans are built once and executed with new-array calls.
PlanHandle make_r2c_plan(std::size_t len) {
  auto in = fftw_buffer<double>(len);
  auto out = fftw_buffer<fftw_complex>(len / 2 + 1);
  fftw_plan plan = nullptr;
#pragma omp critical(sesid_fftw_planner)
  plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in.get(), out.get(),
                              FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (plan == nullptr) {
    throw std::runtime_error("FFTW planning failed");
  }
  return PlanHandle(plan);
}

std::size_t segment_count(std::size_t total, std::size_t len, std::size_t hop) {
  if (len == 0 || hop == 0 || len > total) {
    throw std::invalid_argument("welch_power_sum: bad segment geometry");
  }
  return (total - len) / hop + 1;
}

// |DFT|^2 of one windowed, mean-removed segment, bins 0..L/2.
void segment_power(const fftw_plan_s* plan, std::span<const double> seg,
                   std::span<const double> window, double* in, fftw_complex* out,
                   std::span<double> power) {
  const std::size_t len = seg.size();
  const double mean = std::accumulate(seg.begin(), seg.end(), 0.0) / static_cast<double>(len);
  for (std::size_t i = 0; i < len; ++i) {
    in[i] = window[i] * (seg[i] - mean);
  }
  fftw_execute_dft_r2c(const_cast<fftw_plan>(plan), in, out);
  for (std::size_t b = 0; b < power.size(); ++b) {
    power[b] = out[b][0] * out[b][0] + out[b][1] * out[b][1];
  }
}

}  // namespace

RegressionBlocks regression_rows(std::span<const double> y, std::span<const double> v,
                                 const CplPartition& partition, const RegressionLayout& layout) {
  RegressionBlocks out;
  allocate(out, partition, layout);
  const auto rows = static_cast<std::ptrdiff_t>(layout.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    fill_row(y, v, partition, layout, layout.lower + static_cast<std::size_t>(row),
             static_cast<Eigen::Index>(row), out);
  }
  return out;
}

std::vector<double> welch_power_sum(std::span<const double> x, std::size_t segment_len,
                                    std::size_t hop, std::span<const double> window) {
  const std::size_t segments = segment_count(x.size(), segment_len, hop);
  const std::size_t bins = segment_len / 2 + 1;
  const PlanHandle plan = make_r2c_plan(segment_len);
  std::vector<double> per_segment(segments * bins);

#pragma omp parallel
  {
    auto in = fftw_buffer<double>(segment_len);
    auto out = fftw_buffer<fftw_complex>(bins);
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(segments); ++s) {
      const auto idx = static_cast<std::size_t>(s);
      segment_power(plan.get(), x.subspan(idx * hop, segment_len), window, in.get(), out.get(),
                    std::span<double>(per_segment.data() + idx * bins, bins));
    }
  }

  // Fixed summation order keeps the result identical to the serial reference.
  std::vector<double> total(bins, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t b = 0; b < bins; ++b) {
      total[b] += per_segment[s * bins + b];
    }
  }
  return total;
}

namespace reference {

RegressionBlocks regression_rows(std::span<const double> y, std::span<const double> v,
                                 const CplPartition& partition, const RegressionLayout& layout) {
  RegressionBlocks out;
  allocate(out, partition, layout);
  for (std::size_t k = layout.lower; k <= layout.upper; ++k) {
    fill_row(y, v, partition, layout, k, static_cast<Eigen::Index>(k - layout.lower), out);
  }
  return out;
}

std::vector<double> welch_power_sum(std::span<const double> x, std::size_t segment_len,
                                    std::size_t hop, std::span<const double> window) {
  const std::size_t segments = segment_count(x.size(), segment_len, hop);
  const std::size_t bins = segment_len / 2 + 1;
  const PlanHandle plan = make_r2c_plan(segment_len);
  auto in = fftw_buffer<double>(segment_len);
  auto out = fftw_buffer<fftw_complex>(bins);
  std::vector<double> power(bins);
  std::vector<double> total(bins, 0.0);
  for (std::size_t s = 0; s < segments; ++s) {
    segment_power(plan.get(), x.subspan(s * hop, segment_len), window, in.get(), out.get(), power);
    for (std::size_t b = 0; b < bins; ++b) {
      total[b] += power[b];
    }
  }
  return total;
}

}  // namespace reference

}  // namespace sesid::kernels
