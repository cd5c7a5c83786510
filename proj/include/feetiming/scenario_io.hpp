#pragma once

// Scenario files (YAML subset) and the small text formats the CLI accepts.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feetiming/ctmc.hpp"
#include "feetiming/model.hpp"

namespace feetiming {

struct ScenarioFile {
    Scenario scenario;
    std::optional<CtmcParams> semi;  // present when the file has a semi_strategic section

    bool operator==(const ScenarioFile&) const = default;
};

/// Throws ParseError (with the 1-based line of the offending node) on syntax
/// errors, unknown keys, missing keys and violated model constraints.
ScenarioFile parse_scenario(const std::string& text);
ScenarioFile load_scenario(const std::string& path);

/// Canonical text; parse_scenario(serialize_scenario(f)) == f.
std::string serialize_scenario(const ScenarioFile& file);

std::uint64_t fnv1a64(const std::string& bytes);

/// "0,0.5,2" or "lo:hi:step" (inclusive of hi up to rounding).
std::vector<double> parse_grid(const std::string& text);

/// Inline fees "3,1,4" (empty or "none" for an empty pool), a CSV file with
/// one fee per row, or "draw:<seed>" for a pool drawn from the scenario.
MempoolSnapshot parse_pool_spec(const std::string& spec, const Scenario& scenario, double elapsed);

}  // namespace feetiming
