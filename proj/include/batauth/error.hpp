#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace batauth {

enum class ErrorCode {
  // core-data
  MissingColumn,
  NonFiniteValue,
  TooShortCycle,
  NonMonotoneCapacity,
  NonPositiveFrequency,
  DuplicateFrequency,
  BadMeta,
  EmptyDataset,
  BadCsv,
  // dca-pipeline / eis-pipeline
  AllPointsDropped,
  BadWindow,
  DegenerateVoltageRange,
  DegenerateFrequencyRange,
  BadThreshold,
  // feature-engine
  UnsupportedChannelCount,
  EmptySeries,
  BadInterval,
  IndexOutOfRange,
  BadWidth,
  CatalogMismatch,
  TooFewSamples,
  SingleClass,
  BadArgument,
  // ml-models
  SingularCovariance,
  DimensionMismatch,
  ClassTooSmall,
  GridExhausted,
  BadHyperparams,
  FormatVersionMismatch,
  // eval-explain
  LabelAbsent,
  InfeasibleBalance,
  EmptyCounts,
  UnsupportedKind,
  // synth-lab
  BadSpec,
  // cli
  BadConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// All library failures are reported as this exception. `module()` names the
/// subsystem that raised it so the CLI can print module-qualified messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& message)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(code)) + ": " + message),
        code_(code),
        module_(module) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string_view module_;
};

}  // namespace batauth
