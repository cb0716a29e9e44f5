#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "primadnn/loss.hpp"
#include "primadnn/model.hpp"

namespace primadnn {

struct GradcheckOptions {
  ModelConfig config = ModelConfig::tiny();
  int frames = 6;
  int batch = 2;
  double step = 1e-5;
  int samples_per_block = 0;  // 0 checks every parameter
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error, so entries whose true
  /// gradient is zero (e.g. a conv bias followed by normalization) compare
  /// on absolute error.
  double abs_floor = 1e-6;
  FocalLossParams focal;
  /// Applied to the analytic gradient before comparison (fault injection).
  std::function<void(const ParamLayout&, std::span<double>)> tamper;
};

struct GradcheckEntry {
  std::string name;
  int checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> blocks;  // one per parameter block
  std::vector<GradcheckEntry> layers;  // conv, norm, se, bilstm, affine, focal_loss
  double max_rel_error = 0.0;
  double seconds = 0.0;
  double tolerance = 0.0;
  bool passed = true;

  const GradcheckEntry& layer(const std::string& name) const;
  std::string to_json() const;
  std::string to_text() const;
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central-difference check of the full model plus focal loss in double
/// precision on seeded random inputs and labels.
GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

/// Layer name used in the report for a parameter group.
std::string gradcheck_layer_name(ParamGroup group, const ModelConfig& config);

}  // namespace primadnn
