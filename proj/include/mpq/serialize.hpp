// Copyright (c) 2026, The mpq Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON forms of the toolkit's artifacts. Doubles are written in shortest
// round-trip form, so parse(dump(x)) == x exactly.

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mpq/cost_model.hpp"
#include "mpq/quant_config.hpp"
#include "mpq/quant_spec.hpp"
#include "mpq/quantizer.hpp"
#include "mpq/search.hpp"
#include "mpq/sensitivity.hpp"

namespace mpq {

using Json = nlohmann::ordered_json;

Json to_json(const QuantMap& specs);
QuantMap quant_map_from_json(const Json& j);

Json to_json(const SpecBank& bank);
SpecBank spec_bank_from_json(const Json& j);

Json to_json(const SensitivityReport& report);
SensitivityReport sensitivity_report_from_json(const Json& j);

Json to_json(const QuantConfig& config);
QuantConfig quant_config_from_json(const Json& j);

Json to_json(const SearchOutcome& outcome);
SearchOutcome search_outcome_from_json(const Json& j);

Json to_json(const CostReport& report);
CostReport cost_report_from_json(const Json& j);

/// Pretty-printed with a trailing newline.
std::string dump(const Json& j);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace mpq
