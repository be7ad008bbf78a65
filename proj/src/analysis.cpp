#include "sesid/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "sesid/error.hpp"
#include "sesid/kernels.hpp"

namespace sesid {

double PsdEstimate::integrated_power() const {
  return std::accumulate(power.begin(), power.end(), 0.0) * bin_width();
}

PsdEstimate psd(std::span<const double> signal, double Ts, std::size_t segment_length,
                double overlap) {
  if (!(Ts > 0.0)) {
    throw DomainError("psd: Ts must be positive");
  }
  if (segment_length < 4 || segment_length > signal.size()) {
    throw DomainError("psd: signal of length " + std::to_string(signal.size()) +
                      " is too short for segments of " + std::to_string(segment_length));
  }
  if (!(overlap >= 0.0 && overlap < 1.0)) {
    throw DomainError("psd: overlap must lie in [0, 1)");
  }
  for (double x : signal) {
    if (!std::isfinite(x)) {
      throw DomainError("psd: non-finite sample");
    }
  }
  const std::size_t len = segment_length;
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - overlap))));

  std::vector<double> window(len);
  for (std::size_t i = 0; i < len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(len));
  }
  const double window_energy =
      std::inner_product(window.begin(), window.end(), window.begin(), 0.0);

  const std::vector<double> power_sum = kernels::welch_power_sum(signal, len, hop, window);
  const std::size_t segments = (signal.size() - len) / hop + 1;
  const double fs = 1.0 / Ts;

  PsdEstimate out;
  out.segment_length = len;
  out.segments = segments;
  out.mean_square = std::inner_product(signal.begin(), signal.end(), signal.begin(), 0.0) /
                    static_cast<double>(signal.size());
  const std::size_t bins = power_sum.size();
  out.frequency.resize(bins);
  out.power.resize(bins);
  const double scale = 1.0 / (fs * window_energy * static_cast<double>(segments));
  for (std::size_t b = 0; b < bins; ++b) {
    out.frequency[b] = static_cast<double>(b) * fs / static_cast<double>(len);
    const bool edge = b == 0 || (len % 2 == 0 && b == bins - 1);
    out.power[b] = power_sum[b] * scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

std::size_t fitting_segment_length(std::size_t signal_length, std::size_t preferred) {
  std::size_t len = 4;
  while (len * 2 <= std::min(signal_length, preferred)) {
    len *= 2;
  }
  if (len > signal_length) {
    throw DomainError("fitting_segment_length: signal too short for a spectrum");
  }
  return len;
}

std::size_t dominant_bin(const PsdEstimate& estimate) {
  if (estimate.power.size() < 2) {
    throw DomainError("dominant_frequency: empty spectrum");
  }
  std::size_t best = 1;
  for (std::size_t b = 2; b < estimate.power.size(); ++b) {
    if (estimate.power[b] > estimate.power[best]) {
      best = b;
    }
  }
  // Anything at rounding level relative to the raw signal power counts as no content.
  const double content = estimate.power[best] * estimate.bin_width();
  if (!(content > 1e-20 * estimate.mean_square) || !(content > 0.0)) {
    throw DomainError("dominant_frequency: spectrum has no nonzero-frequency content");
  }
  return best;
}

double dominant_frequency(const PsdEstimate& estimate) {
  return estimate.frequency[dominant_bin(estimate)];
}

double variance(std::span<const double> x) {
  if (x.empty()) {
    return 0.0;
  }
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double acc = 0.0;
  for (double xi : x) {
    acc += (xi - mean) * (xi - mean);
  }
  return acc / static_cast<double>(x.size());
}

double snr_db(std::span<const double> signal, std::span<const double> noise) {
  const double pn = variance(noise);
  if (pn == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return 10.0 * std::log10(variance(signal) / pn);
}

NoisyRecord add_noise_std(const SignalRecord& record, double std, std::uint64_t seed) {
  record.validate();
  if (!(std >= 0.0) || !std::isfinite(std)) {
    throw DomainError("add_noise: std must be finite and nonnegative");
  }
  if (record.size() == 0) {
    throw DomainError("add_noise: empty record");
  }
  NoisyRecord out{record, std, std::numeric_limits<double>::infinity()};
  if (std == 0.0) {
    return out;
  }
  const auto noise = gaussian_sequence(record.size(), 0.0, std, seed);
  for (std::size_t k = 0; k < noise.size(); ++k) {
    out.record.y[k] += noise[k];
  }
  out.achieved_snr_db = snr_db(record.y, noise);
  return out;
}

NoisyRecord add_noise(const SignalRecord& record, double target_snr_db, std::uint64_t seed) {
  if (std::isnan(target_snr_db)) {
    throw DomainError("add_noise: target SNR is NaN");
  }
  if (target_snr_db == std::numeric_limits<double>::infinity()) {
    return add_noise_std(record, 0.0, seed);
  }
  const double power = variance(record.y);
  if (!(power > 0.0)) {
    throw DomainError("add_noise: signal has zero power");
  }
  return add_noise_std(record, std::sqrt(power / std::pow(10.0, target_snr_db / 10.0)), seed);
}

std::complex<double> transfer_value(std::span<const double> a, std::span<const double> b,
                                    std::complex<double> q) {
  // Written in powers of q^{-1}: sum b_i q^{-i} / (1 + sum a_i q^{-i}).
  const std::complex<double> qinv = 1.0 / q;
  std::complex<double> num = 0.0;
  std::complex<double> den = 1.0;
  std::complex<double> pw = 1.0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    pw *= qinv;
    if (i < b.size()) num += b[i] * pw;
    if (i < a.size()) den += a[i] * pw;
  }
  return num / den;
}

FrequencyResponse frequency_response(std::span<const double> a, std::span<const double> b,
                                     double Ts, std::size_t points) {
  if (points == 0 || !(Ts > 0.0)) {
    throw DomainError("frequency_response: need points > 0 and Ts > 0");
  }
  for (double x : a) {
    if (!std::isfinite(x)) throw DomainError("frequency_response: non-finite coefficient");
  }
  for (double x : b) {
    if (!std::isfinite(x)) throw DomainError("frequency_response: non-finite coefficient");
  }
  FrequencyResponse out;
  const double a_scale = 1.0 + std::accumulate(a.begin(), a.end(), 0.0, [](double s, double x) {
                           return s + std::abs(x);
                         });
  double previous = 0.0;
  double offset = 0.0;
  for (std::size_t i = 1; i <= points; ++i) {
    const double w = std::numbers::pi * static_cast<double>(i) / static_cast<double>(points);
    const std::complex<double> q = std::polar(1.0, w);
    std::complex<double> den = 1.0;
    std::complex<double> pw = 1.0;
    for (double ai : a) {
      pw /= q;
      den += ai * pw;
    }
    out.omega.push_back(w / Ts);
    if (std::abs(den) <= 1e-12 * a_scale) {
      out.singular_points.push_back(i - 1);
      out.magnitude_db.push_back(std::numeric_limits<double>::infinity());
      out.phase.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const std::complex<double> g = transfer_value(a, b, q);
    out.magnitude_db.push_back(20.0 * std::log10(std::abs(g)));
    double ph = std::arg(g) + offset;
    if (i > 1) {
      while (ph - previous > std::numbers::pi) {
        ph -= 2.0 * std::numbers::pi;
        offset -= 2.0 * std::numbers::pi;
      }
      while (ph - previous < -std::numbers::pi) {
        ph += 2.0 * std::numbers::pi;
        offset += 2.0 * std::numbers::pi;
      }
    }
    previous = ph;
    out.phase.push_back(ph);
  }
  return out;
}

std::vector<std::pair<double, double>> phase_portrait(std::span<const double> y, double Ts) {
  if (y.size() < 3) {
    throw DomainError("phase_portrait: need at least three samples");
  }
  if (!(Ts > 0.0)) {
    throw DomainError("phase_portrait: Ts must be positive");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(y.size() - 2);
  for (std::size_t k = 1; k + 1 < y.size(); ++k) {
    out.emplace_back(y[k], (y[k + 1] - y[k - 1]) / (2.0 * Ts));
  }
  return out;
}

std::vector<std::pair<double, double>> phase_portrait(const SignalRecord& record) {
  return phase_portrait(record.y, record.sample_time);
}

int best_alignment_shift(std::span<const double> reference, std::span<const double> candidate,
                         int max_shift) {
  if (reference.empty() || candidate.empty() || max_shift < 0) {
    throw DomainError("best_alignment_shift: empty input or negative max_shift");
  }
  int best_shift = 0;
  double best_corr = -std::numeric_limits<double>::infinity();
  const auto ref_len = static_cast<long>(reference.size());
  const auto cand_len = static_cast<long>(candidate.size());
  for (int s = -max_shift; s <= max_shift; ++s) {
    const long k0 = std::max(0L, -static_cast<long>(s));
    const long k1 = std::min(ref_len, cand_len - s);
    if (k1 - k0 < 2) {
      continue;
    }
    double mr = 0.0;
    double mc = 0.0;
    for (long k = k0; k < k1; ++k) {
      mr += reference[static_cast<std::size_t>(k)];
      mc += candidate[static_cast<std::size_t>(k + s)];
    }
    const auto count = static_cast<double>(k1 - k0);
    mr /= count;
    mc /= count;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (long k = k0; k < k1; ++k) {
      const double dr = reference[static_cast<std::size_t>(k)] - mr;
      const double dc = candidate[static_cast<std::size_t>(k + s)] - mc;
      sxy += dr * dc;
      sxx += dr * dr;
      syy += dc * dc;
    }
    const double corr = (sxx > 0.0 && syy > 0.0) ? sxy / std::sqrt(sxx * syy) : 0.0;
    if (corr > best_corr + 1e-12 ||
        (std::abs(corr - best_corr) <= 1e-12 && std::abs(s) < std::abs(best_shift))) {
      best_corr = corr;
      best_shift = s;
    }
  }
  return best_shift;
}

double range_overlap(std::span<const double> reference, std::span<const double> candidate) {
  if (reference.empty() || candidate.empty()) {
    throw DomainError("range_overlap: empty input");
  }
  const auto [rlo, rhi] = std::minmax_element(reference.begin(), reference.end());
  const auto [clo, chi] = std::minmax_element(candidate.begin(), candidate.end());
  const double width = *rhi - *rlo;
  const double inter = std::min(*rhi, *chi) - std::max(*rlo, *clo);
  if (!(width > 0.0)) {
    return inter >= 0.0 ? 1.0 : 0.0;
  }
  return std::max(0.0, inter) / width;
}

bool is_bounded_oscillation(std::span<const double> y, double bound, double min_swing) {
  if (y.empty()) {
    return false;
  }
  double lo = y[0];
  double hi = y[0];
  for (double x : y) {
    if (!std::isfinite(x) || std::abs(x) > bound) {
      return false;
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi - lo > min_swing;
}

double closure_gap(const std::vector<std::pair<double, double>>& portrait, std::size_t start,
                   std::size_t period) {
  if (period < 2 || start + period + period / 2 >= portrait.size()) {
    throw DomainError("closure_gap: portrait too short for the requested period");
  }
  double xlo = portrait[0].first, xhi = xlo, ylo = portrait[0].second, yhi = ylo;
  for (const auto& [x, yd] : portrait) {
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, yd);
    yhi = std::max(yhi, yd);
  }
  const double diameter = std::hypot(xhi - xlo, yhi - ylo);
  if (!(diameter > 0.0)) {
    return 0.0;
  }
  double best = std::numeric_limits<double>::infinity();
  const auto [x0, y0] = portrait[start];
  for (std::size_t j = start + period / 2; j <= start + period + period / 2; ++j) {
    best = std::min(best, std::hypot(portrait[j].first - x0, portrait[j].second - y0));
  }
  return best / diameter;
}

}  // namespace sesid
