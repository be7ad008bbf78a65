#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sesid/lure.hpp"

namespace sesid {

struct PsdEstimate {
  std::vector<double> frequency;  // Hz when Ts is in seconds, cycles/sample when Ts = 1
  std::vector<double> power;      // one-sided density
  std::size_t segment_length = 0;
  std::size_t segments = 0;
  double mean_square = 0.0;       // mean of x^2 of the input, before mean removal
  const char* window = "hann";

  double bin_width() const noexcept { return frequency.size() > 1 ? frequency[1] : 0.0; }
  // sum(power) * bin width
  double integrated_power() const;
};

inline constexpr std::size_t kDefaultSegmentLength = 4096;

/// Welch estimate: periodic Hann window, per-segment mean removal, `overlap` fraction of
/// overlap between consecutive segments, one-sided density scaled so the integral over
/// frequency matches the signal variance.
PsdEstimate psd(std::span<const double> signal, double Ts,
                std::size_t segment_length = kDefaultSegmentLength, double overlap = 0.5);

// Largest segment length <= preferred that is a power of two and fits the signal.
std::size_t fitting_segment_length(std::size_t signal_length,
                                   std::size_t preferred = kDefaultSegmentLength);

// Frequency of the largest non-DC bin; ties go to the lower frequency.
// Throws DomainError when there is no non-DC content.
double dominant_frequency(const PsdEstimate& estimate);
std::size_t dominant_bin(const PsdEstimate& estimate);

struct NoisyRecord {
  SignalRecord record;
  double noise_std = 0.0;
  double achieved_snr_db = 0.0;  // 10 log10(var(y) / var(noise)), +inf without noise
};

// Adds N(0, std^2) sensor noise to y.
NoisyRecord add_noise_std(const SignalRecord& record, double std, std::uint64_t seed);
// Picks the noise std so that 10 log10(var(y) / std^2) = target_snr_db; +inf adds nothing.
NoisyRecord add_noise(const SignalRecord& record, double target_snr_db, std::uint64_t seed);

double variance(std::span<const double> x);
double snr_db(std::span<const double> signal, std::span<const double> noise);

struct FrequencyResponse {
  std::vector<double> omega;      // rad/sample divided by Ts
  std::vector<double> magnitude_db;
  std::vector<double> phase;      // unwrapped, radians
  std::vector<std::size_t> singular_points;  // grid indices where A(e^{jw}) vanishes
};

/// B(e^{jw}) / A(e^{jw}) for w_i = pi i / points, i = 1..points.
FrequencyResponse frequency_response(std::span<const double> a, std::span<const double> b,
                                     double Ts = 1.0, std::size_t points = 512);
std::complex<double> transfer_value(std::span<const double> a, std::span<const double> b,
                                    std::complex<double> q);

// (y_k, (y_{k+1} - y_{k-1}) / (2 Ts)) for k = 1 .. N-2.
std::vector<std::pair<double, double>> phase_portrait(std::span<const double> y, double Ts);
std::vector<std::pair<double, double>> phase_portrait(const SignalRecord& record);

// Integer shift s in [-max_shift, max_shift] maximising the normalised cross-correlation of
// reference[k] with candidate[k + s].
int best_alignment_shift(std::span<const double> reference, std::span<const double> candidate,
                         int max_shift);

// |[min a, max a] intersect [min b, max b]| / |[min a, max a]|.
double range_overlap(std::span<const double> reference, std::span<const double> candidate);

// Oscillation check: finite, bounded by `bound`, and peak-to-peak above `min_swing`.
bool is_bounded_oscillation(std::span<const double> y, double bound, double min_swing);

// Smallest distance between portrait point `start` and the points `period` +- period/2 later,
// divided by the portrait diameter. Small values mean the curve closes on itself.
double closure_gap(const std::vector<std::pair<double, double>>& portrait, std::size_t start,
                   std::size_t period);

}  // namespace sesid
