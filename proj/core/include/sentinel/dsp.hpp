#pragma once

#include <cstddef>
#include <span>
#include <vector>

/// Numeric building blocks shared by the signal modules: Butterworth
/// filtering, FFT power spectra, and small moment helpers.
namespace sentinel::dsp {

/// One direct-form-II-transposed biquad, a0 normalized to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

using Sos = std::vector<Biquad>;

Sos butter_lowpass(int order, double cutoff_hz, double sample_rate);
Sos butter_highpass(int order, double cutoff_hz, double sample_rate);

/// Band-pass as a high-pass cascade followed by a low-pass cascade.
Sos butter_bandpass(int order, double lo_hz, double hi_hz, double sample_rate);

/// Single causal pass.
std::vector<double> sosfilt(const Sos& sos, std::span<const double> x);

/// Zero-phase forward-backward filtering with odd-reflection padding and
/// steady-state initial conditions.
std::vector<double> filtfilt(const Sos& sos, std::span<const double> x);

/// Magnitude response |H(e^{j 2 pi f / fs})|.
double magnitude_response(const Sos& sos, double freq_hz, double sample_rate);

/// |X_k|^2 for k = 0..nfft/2 of the zero-padded (or truncated) input.
/// Thread-safe; FFTW plans are cached per length.
std::vector<double> power_spectrum(std::span<const double> x, std::size_t nfft);

/// Copy with NaNs replaced by linear interpolation between finite
/// neighbours (edges hold the nearest finite value; all-NaN becomes zeros).
std::vector<double> fill_missing(std::span<const double> x);

double mean(std::span<const double> x);
/// Population variance (divide by N).
double variance(std::span<const double> x);
double stddev(std::span<const double> x);

/// Centered moving average over `width` samples (clipped at the edges).
std::vector<double> moving_average(std::span<const double> x, std::size_t width);

}  // namespace sentinel::dsp
