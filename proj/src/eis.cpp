#include <batauth/eis.hpp>
#include <batauth/error.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace batauth {

namespace {

constexpr std::string_view kModule = "eis-pipeline";

}  // namespace

Vector interpolate_linear(const Vector& x, const Vector& y, const Vector& at) {
  const auto n = x.size();
  Vector out(at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double t = at[i];
    // First node strictly greater than t, clamped to the last segment.
    auto upper = std::upper_bound(x.data(), x.data() + n, t) - x.data();
    Eigen::Index hi = std::clamp<Eigen::Index>(upper, 1, n - 1);
    Eigen::Index lo = hi - 1;
    if (t == x[lo]) {
      out[i] = y[lo];
    } else if (t == x[hi]) {
      out[i] = y[hi];
    } else {
      const double w = (t - x[lo]) / (x[hi] - x[lo]);
      out[i] = y[lo] + w * (y[hi] - y[lo]);
    }
  }
  return out;
}

NyquistChannels resample_logfreq(const EisSpectrum& spectrum, int m) {
  if (m < 2) throw Error(ErrorCode::BadArgument, kModule, "resample length m must be >= 2");
  const auto n = spectrum.frequency.size();
  if (n < 2 || spectrum.frequency[n - 1] <= spectrum.frequency[0]) {
    throw Error(ErrorCode::DegenerateFrequencyRange, kModule, "need at least two distinct frequencies");
  }
  const Vector log_f = spectrum.frequency.array().log10();
  const double lo = log_f[0];
  const double hi = log_f[n - 1];

  NyquistChannels out;
  out.meta = spectrum.meta;
  out.log_freq_grid.resize(m);
  const double step = (hi - lo) / static_cast<double>(m - 1);
  for (int i = 0; i < m; ++i) out.log_freq_grid[i] = lo + step * i;
  out.log_freq_grid[m - 1] = hi;
  out.re_z = interpolate_linear(log_f, spectrum.z_real, out.log_freq_grid);
  out.neg_im_z = interpolate_linear(log_f, -spectrum.z_imag, out.log_freq_grid);
  return out;
}

void validate(const EisConfig& config) {
  if (config.m < 2) throw Error(ErrorCode::BadArgument, kModule, "m must be >= 2");
}

NyquistChannels process_spectrum(const EisSpectrum& spectrum, const EisConfig& config) {
  validate(config);
  const auto n = spectrum.frequency.size();
  if (spectrum.z_real.size() != n || spectrum.z_imag.size() != n) {
    throw Error(ErrorCode::BadArgument, kModule, "frequency and impedance lengths differ");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return spectrum.frequency[a] < spectrum.frequency[b]; });
  EisSpectrum sorted;
  sorted.meta = spectrum.meta;
  sorted.frequency = spectrum.frequency(order);
  sorted.z_real = spectrum.z_real(order);
  sorted.z_imag = spectrum.z_imag(order);
  validate_spectrum(sorted);
  return resample_logfreq(sorted, config.m);
}

std::string nyquist_to_csv(const NyquistChannels& channels) {
  std::string out = "log10_freq,re_z,neg_im_z\n";
  for (Eigen::Index i = 0; i < channels.log_freq_grid.size(); ++i) {
    out += format_double(channels.log_freq_grid[i]) + "," + format_double(channels.re_z[i]) + "," +
           format_double(channels.neg_im_z[i]) + "\n";
  }
  return out;
}

}  // namespace batauth
