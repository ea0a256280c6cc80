#pragma once

#include <batauth/core_data.hpp>
#include <batauth/types.hpp>

#include <string>

namespace batauth {

/// Impedance channels on a grid uniform in log10(frequency). `neg_im_z`
/// holds -Im Z so that capacitive arcs are positive.
struct NyquistChannels {
  Vector log_freq_grid;
  Vector re_z;
  Vector neg_im_z;
  SampleMeta meta;
};

struct EisConfig {
  int m = 128;
};

NyquistChannels resample_logfreq(const EisSpectrum& spectrum, int m);

/// Validates the sweep (sorting rows by frequency first) and resamples it.
NyquistChannels process_spectrum(const EisSpectrum& spectrum, const EisConfig& config = {});

void validate(const EisConfig& config);

/// log10_freq,re_z,neg_im_z
std::string nyquist_to_csv(const NyquistChannels& channels);

/// Linear interpolation of (x, y) at `at`; x strictly increasing, `at` inside [x.front, x.back].
Vector interpolate_linear(const Vector& x, const Vector& y, const Vector& at);

}  // namespace batauth
