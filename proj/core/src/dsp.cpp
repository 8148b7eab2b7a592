#include "sentinel/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "sentinel/error.hpp"

namespace sentinel::dsp {
namespace {

using cplx = std::complex<double>;

enum class Shape { Low, High };

void check_cutoff(int order, double cutoff_hz, double sample_rate) {
  if (order < 1 || sample_rate <= 0.0 || cutoff_hz <= 0.0 || cutoff_hz >= sample_rate / 2.0) {
    throw Error(ErrorCode::InvalidArgument, "Butterworth design needs order >= 1 and 0 < fc < fs/2");
  }
}

// Analog prototype poles mapped through the bilinear transform with
// frequency prewarping; conjugate pairs become biquads.
Sos butter(Shape shape, int order, double cutoff_hz, double sample_rate) {
  check_cutoff(order, cutoff_hz, sample_rate);
  const double fs2 = 2.0 * sample_rate;
  const double warped = fs2 * std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  auto to_z = [&](cplx s) { return (1.0 + s / fs2) / (1.0 - s / fs2); };

  Sos sos;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const cplx proto = std::polar(1.0, theta);
    const cplx s = shape == Shape::Low ? warped * proto : warped / proto;
    const cplx z = to_z(s);
    Biquad bq;
    bq.a1 = -2.0 * z.real();
    bq.a2 = std::norm(z);
    if (shape == Shape::Low) {
      const double g = (1.0 + bq.a1 + bq.a2) / 4.0;
      bq.b0 = g;
      bq.b1 = 2.0 * g;
      bq.b2 = g;
    } else {
      const double g = (1.0 - bq.a1 + bq.a2) / 4.0;
      bq.b0 = g;
      bq.b1 = -2.0 * g;
      bq.b2 = g;
    }
    sos.push_back(bq);
  }
  if (order % 2 == 1) {
    // The real prototype pole at -1 maps to -warped for both shapes.
    const double z = (1.0 - warped / fs2) / (1.0 + warped / fs2);
    Biquad bq;
    bq.a1 = -z;
    bq.a2 = 0.0;
    if (shape == Shape::Low) {
      const double g = (1.0 - z) / 2.0;
      bq.b0 = g;
      bq.b1 = g;
    } else {
      const double g = (1.0 + z) / 2.0;
      bq.b0 = g;
      bq.b1 = -g;
    }
    bq.b2 = 0.0;
    sos.push_back(bq);
  }
  return sos;
}

double dc_gain(const Biquad& bq) { return (bq.b0 + bq.b1 + bq.b2) / (1.0 + bq.a1 + bq.a2); }

void run_sections(const Sos& sos, std::vector<double>& x, bool steady_start) {
  if (x.empty()) return;
  double level = x.front();
  for (const auto& bq : sos) {
    double z1 = 0.0, z2 = 0.0;
    if (steady_start) {
      const double y = dc_gain(bq) * level;
      z2 = bq.b2 * level - bq.a2 * y;
      z1 = bq.b1 * level - bq.a1 * y + z2;
      level = y;
    }
    for (auto& v : x) {
      const double in = v;
      const double out = bq.b0 * in + z1;
      z1 = bq.b1 * in - bq.a1 * out + z2;
      z2 = bq.b2 * in - bq.a2 * out;
      v = out;
    }
  }
}

struct PlanCache {
  std::mutex mutex;
  std::map<std::size_t, fftw_plan> plans;

  ~PlanCache() {
    for (auto& [n, plan] : plans) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n) {
    std::lock_guard lock(mutex);
    if (auto it = plans.find(n); it != plans.end()) return it->second;
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    auto plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    plans.emplace(n, plan);
    return plan;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

Sos butter_lowpass(int order, double cutoff_hz, double sample_rate) {
  return butter(Shape::Low, order, cutoff_hz, sample_rate);
}

Sos butter_highpass(int order, double cutoff_hz, double sample_rate) {
  return butter(Shape::High, order, cutoff_hz, sample_rate);
}

Sos butter_bandpass(int order, double lo_hz, double hi_hz, double sample_rate) {
  if (!(lo_hz < hi_hz)) throw Error(ErrorCode::InvalidArgument, "band-pass needs lo < hi");
  Sos sos = butter_highpass(order, lo_hz, sample_rate);
  auto lp = butter_lowpass(order, hi_hz, sample_rate);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

std::vector<double> sosfilt(const Sos& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_sections(sos, y, false);
  return y;
}

std::vector<double> filtfilt(const Sos& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (n == 1) return {x[0]};
  const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * sos.size() + 1) * 4);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_sections(sos, ext, true);
  std::reverse(ext.begin(), ext.end());
  run_sections(sos, ext, true);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

double magnitude_response(const Sos& sos, double freq_hz, double sample_rate) {
  const cplx z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& bq : sos) {
    h *= (bq.b0 + bq.b1 * z1 + bq.b2 * z2) / (1.0 + bq.a1 * z1 + bq.a2 * z2);
  }
  return std::abs(h);
}

std::vector<double> power_spectrum(std::span<const double> x, std::size_t nfft) {
  if (nfft < 2) throw Error(ErrorCode::InvalidArgument, "FFT length must be >= 2");
  std::vector<double> in(nfft, 0.0);
  std::copy_n(x.begin(), std::min(nfft, x.size()), in.begin());
  std::vector<fftw_complex> out(nfft / 2 + 1);
  fftw_execute_dft_r2c(plan_cache().get(nfft), in.data(), out.data());
  std::vector<double> power(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  return power;
}

std::vector<double> fill_missing(std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  const std::size_t n = y.size();
  std::size_t prev = n;  // index of last finite sample
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) continue;
    if (prev == n) {
      std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(i), y[i]);
    } else if (i > prev + 1) {
      const double span = static_cast<double>(i - prev);
      for (std::size_t j = prev + 1; j < i; ++j) {
        y[j] = y[prev] + (y[i] - y[prev]) * static_cast<double>(j - prev) / span;
      }
    }
    prev = i;
  }
  if (prev == n) {
    std::fill(y.begin(), y.end(), 0.0);
  } else {
    std::fill(y.begin() + static_cast<std::ptrdiff_t>(prev) + 1, y.end(), y[prev]);
  }
  return y;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double mu = mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - mu) * (v - mu);
  return acc / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

std::vector<double> moving_average(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  if (n == 0 || width == 0) return out;
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  const std::size_t before = (width - 1) / 2;
  const std::size_t after = width - 1 - before;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(n, i + after + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

}  // namespace sentinel::dsp
