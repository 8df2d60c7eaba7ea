#pragma once

#include <string>

#include "cspcr/engine.hpp"
#include "cspcr/ratio.hpp"

namespace cspcr {

// Report JSON: fixed schema, numbers with 17 significant digits so the file
// round-trips losslessly.
std::string report_to_json(const TestReport& report);
TestReport report_from_json(const std::string& text);

// Model parameter files (schema_version 1): the factorized / classifier ratio
// and the Gaussian-linear sampler.
std::string ratio_model_to_json(const FactorizedRatio& fr);
FactorizedRatio ratio_model_from_json(const std::string& text);

std::string sampler_model_to_json(const GaussianLinearModel& m);
GaussianLinearModel sampler_model_from_json(const std::string& text);

// Serialization helper for full elastic-net fits (cmd ratio-fit output keeps
// the standardization and CV metadata for audit).
std::string factorized_fit_to_json(const FactorizedFitResult& fit);

}  // namespace cspcr
