#pragma once

#include <string>

#include "json.hpp"

#include "ocml/bench.hpp"
#include "ocml/data.hpp"
#include "ocml/dml.hpp"
#include "ocml/refute.hpp"
#include "ocml/tune.hpp"

namespace ocml {

inline constexpr int kReportVersion = 1;

nlohmann::json to_json(const DgpSpec& spec);
DgpSpec dgp_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ParamGrid& grid);
ParamGrid grid_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NuisanceSpec& spec);
NuisanceSpec nuisance_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DmlSpec& spec);
DmlSpec dml_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EffectEstimate& est);
nlohmann::json to_json(const TuneResult& res);
nlohmann::json to_json(const RefutationReport& rep);
nlohmann::json to_json(const OverlapReport& rep);

// Canonical text of an estimate; equal strings mean equal estimates.
std::string estimate_fingerprint(const EffectEstimate& est);

}  // namespace ocml
