#pragma once

// Built-in measures, drifts and jump coefficients, keyed by name.
//
// Measure families:
//   lebesgue               h = 1 on R^d, zero envelopes
//   example1-exp           h = 1, cbar = exp(-a1 |z|^p / 2), clower = exp(-a2 |z|^p)
//   example1-poly          h = 1, cbar = sqrt(a1 / (1 + |z|^p)), clower = a2 / (1 + |z|^p)
//   example2-alpha-stable  d = 1, h = |z|^(alpha-1) on |z| >= 1,
//                          cbar = sigma_upper / |z|, clower = sigma_lower / |z|^4
// Drifts: zero, mean-reverting, linear, constant.
// Jumps:  zero, constant, kac, state-independent, own-position, sigma-over-z.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mvjump/coefficients.hpp"
#include "mvjump/levy_model.hpp"

namespace mvjump {

using ParamMap = std::map<std::string, double>;

struct ModelChoice {
  std::string measure = "lebesgue";
  ParamMap measure_params;
  std::string drift = "zero";
  ParamMap drift_params;
  std::string jump = "zero";
  ParamMap jump_params;
  /// "measure" takes the envelopes of the measure family, "zero" sets them to 0.
  std::string envelopes = "measure";
  std::size_t max_ring = 64;
};

struct ModelBundle {
  std::shared_ptr<const LevyMeasureModel> levy;
  CoefficientModel coeffs;
};

std::vector<std::string> measure_names();
std::vector<std::string> drift_names();
std::vector<std::string> jump_names();

/// Parameters with their defaults.  Unknown keys are rejected by the builders.
ParamMap measure_defaults(const std::string& name);
ParamMap drift_defaults(const std::string& name);
ParamMap jump_defaults(const std::string& name);

std::shared_ptr<const LevyMeasureModel> make_measure(const std::string& name,
                                                     const ParamMap& params,
                                                     std::size_t max_ring = 64,
                                                     LevyModelOptions options = {});

/// Dimension implied by a measure family and its parameters.
std::size_t measure_dimension(const std::string& name, const ParamMap& params);

/// Envelope triple of a measure family (empty functions for zero envelopes).
void apply_measure_envelopes(const std::string& name, const ParamMap& params,
                             CoefficientModel& coeffs);

DriftFn make_drift(const std::string& name, const ParamMap& params, std::size_t dimension);
JumpFn make_jump(const std::string& name, const ParamMap& params, std::size_t dimension);

ModelBundle make_model(const ModelChoice& choice, LevyModelOptions options = {});

/// Merge user parameters over defaults; ConfigError naming the key on unknowns.
ParamMap merge_params(const std::string& what, const ParamMap& defaults, const ParamMap& given);

}  // namespace mvjump
