#include <batauth/dca.hpp>
#include <batauth/eis.hpp>
#include <batauth/error.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace batauth {

namespace {

constexpr std::string_view kModule = "dca-pipeline";

void check_window(Eigen::Index length, int window, int polyorder) {
  if (polyorder < 0) throw Error(ErrorCode::BadWindow, kModule, "polyorder must be non-negative");
  if (window % 2 == 0 || window < 1) {
    throw Error(ErrorCode::BadWindow, kModule, "window " + std::to_string(window) + " must be a positive odd integer");
  }
  if (window <= polyorder) {
    throw Error(ErrorCode::BadWindow, kModule,
                "window " + std::to_string(window) + " must exceed polyorder " + std::to_string(polyorder));
  }
  if (window > length) {
    throw Error(ErrorCode::BadWindow, kModule,
                "window " + std::to_string(window) + " exceeds series length " + std::to_string(length));
  }
}

Vector linspace(double lo, double hi, int n) {
  Vector grid(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) grid[i] = lo + step * i;
  grid[n - 1] = hi;
  return grid;
}

}  // namespace

std::string_view to_string(DcaStage stage) noexcept {
  switch (stage) {
    case DcaStage::Raw: return "raw";
    case DcaStage::Cleaned: return "cleaned";
    case DcaStage::Smoothed: return "smoothed";
    case DcaStage::Resampled: return "resampled";
  }
  return "raw";
}

DcaSeries raw_differential_capacity(const CycleRecord& cycle) {
  const auto n = cycle.voltage.size();
  if (n < 2 || cycle.capacity.size() != n) {
    throw Error(ErrorCode::TooShortCycle, kModule, "need at least 2 samples, got " + std::to_string(n));
  }
  DcaSeries out;
  out.meta = cycle.meta;
  out.stage = DcaStage::Raw;
  const auto dv = cycle.voltage.tail(n - 1) - cycle.voltage.head(n - 1);
  const auto dq = cycle.capacity.tail(n - 1) - cycle.capacity.head(n - 1);
  out.dqdv = dq.cwiseQuotient(dv);
  out.grid_voltage = 0.5 * (cycle.voltage.tail(n - 1) + cycle.voltage.head(n - 1));
  out.nonfinite_count = static_cast<std::size_t>((!out.dqdv.array().isFinite()).count());
  return out;
}

CycleRecord clean_dca(const CycleRecord& cycle, double eps_volts) {
  if (!(eps_volts > 0.0)) throw Error(ErrorCode::BadThreshold, kModule, "eps_volts must be > 0");
  const auto n = cycle.voltage.size();
  if (n == 0) throw Error(ErrorCode::AllPointsDropped, kModule, "empty cycle");
  std::vector<Eigen::Index> keep{0};
  double last = cycle.voltage[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    if (std::abs(cycle.voltage[i] - last) >= eps_volts) {
      keep.push_back(i);
      last = cycle.voltage[i];
    }
  }
  if (keep.size() < 2) {
    throw Error(ErrorCode::AllPointsDropped, kModule,
                "fewer than 2 samples survive voltage cleaning at eps=" + format_double(eps_volts));
  }
  CycleRecord out;
  out.cycle_kind = cycle.cycle_kind;
  out.meta = cycle.meta;
  out.voltage = cycle.voltage(keep);
  out.capacity = cycle.capacity(keep);
  return out;
}

Vector savgol_coefficients(int window, int polyorder) {
  check_window(window, window, polyorder);
  const int half = window / 2;
  // Positions scaled to [-1, 1]; the fitted value at the centre is invariant to the scaling.
  const double scale = half > 0 ? static_cast<double>(half) : 1.0;
  Eigen::MatrixXd design(window, polyorder + 1);
  for (int i = 0; i < window; ++i) {
    const double t = (i - half) / scale;
    double power = 1.0;
    for (int j = 0; j <= polyorder; ++j) {
      design(i, j) = power;
      power *= t;
    }
  }
  // Row `half` of the hat matrix design * pinv(design).
  Eigen::MatrixXd pinv = design.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(window, window));
  return (design.row(half) * pinv).transpose();
}

Vector savgol_filter(const Vector& values, int window, int polyorder) {
  const auto n = values.size();
  check_window(n, window, polyorder);
  const Vector weights = savgol_coefficients(window, polyorder);
  const Eigen::Index half = window / 2;
  auto mirror = [n](Eigen::Index k) {
    if (k < 0) return -k;
    if (k >= n) return 2 * (n - 1) - k;
    return k;
  };
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    if (i >= half && i + half < n) {
      acc = weights.dot(values.segment(i - half, window));
    } else {
      for (Eigen::Index j = 0; j < window; ++j) acc += weights[j] * values[mirror(i + j - half)];
    }
    out[i] = acc;
  }
  return out;
}

DcaSeries savgol_smooth(const DcaSeries& series, int window, int polyorder) {
  check_window(series.size(), window, polyorder);
  if (!series.dqdv.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, kModule, "cannot smooth a series containing non-finite values");
  }
  DcaSeries out = series;
  out.dqdv = savgol_filter(series.dqdv, window, polyorder);
  out.stage = DcaStage::Smoothed;
  out.nonfinite_count = 0;
  return out;
}

DcaSeries resample_uniform(const DcaSeries& series, int n) {
  if (n < 2) throw Error(ErrorCode::BadArgument, kModule, "resample length must be >= 2");
  if (series.size() == 0 || series.grid_voltage.size() != series.size()) {
    throw Error(ErrorCode::DegenerateVoltageRange, kModule, "empty series");
  }
  if (!series.dqdv.allFinite() || !series.grid_voltage.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, kModule, "cannot resample a series containing non-finite values");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(series.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return series.grid_voltage[a] < series.grid_voltage[b]; });

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < order.size();) {
    const double v = series.grid_voltage[order[i]];
    double sum = 0.0;
    std::size_t count = 0;
    for (; i < order.size() && series.grid_voltage[order[i]] == v; ++i, ++count) sum += series.dqdv[order[i]];
    xs.push_back(v);
    ys.push_back(sum / static_cast<double>(count));
  }
  if (xs.size() < 2) {
    throw Error(ErrorCode::DegenerateVoltageRange, kModule, "all voltages equal, cannot build a voltage grid");
  }
  const Vector x = Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));

  DcaSeries out;
  out.meta = series.meta;
  out.stage = DcaStage::Resampled;
  out.grid_voltage = linspace(x[0], x[x.size() - 1], n);
  out.dqdv = interpolate_linear(x, y, out.grid_voltage);
  return out;
}

void validate(const DcaConfig& config) {
  if (!(config.eps_volts > 0.0) || !std::isfinite(config.eps_volts)) {
    throw Error(ErrorCode::BadThreshold, kModule, "eps_volts must be a positive number");
  }
  if (config.savgol_window < 1 || config.savgol_window % 2 == 0) {
    throw Error(ErrorCode::BadWindow, kModule, "savgol_window must be a positive odd integer");
  }
  if (config.savgol_polyorder < 0 || config.savgol_polyorder >= config.savgol_window) {
    throw Error(ErrorCode::BadWindow, kModule, "savgol_polyorder must be in [0, savgol_window)");
  }
  if (config.resample_n < 2) throw Error(ErrorCode::BadArgument, kModule, "resample_n must be >= 2");
}

DcaSeries process_cycle(const CycleRecord& cycle, const DcaConfig& config) {
  validate(config);
  const CycleRecord cleaned = clean_dca(cycle, config.eps_volts);
  DcaSeries raw = raw_differential_capacity(cleaned);
  raw.stage = DcaStage::Cleaned;
  int window = std::min<int>(config.savgol_window, static_cast<int>(raw.size()));
  if (window % 2 == 0) --window;
  const DcaSeries smooth = savgol_smooth(raw, window, config.savgol_polyorder);
  return resample_uniform(smooth, config.resample_n);
}

std::string dca_series_to_csv(const DcaSeries& series) {
  std::string out = "grid_voltage,dqdv\n";
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    out += format_double(series.grid_voltage[i]);
    out += ',';
    out += format_double(series.dqdv[i]);
    out += '\n';
  }
  return out;
}

}  // namespace batauth
