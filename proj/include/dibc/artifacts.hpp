#pragma once

#include <json.hpp>
#include <optional>
#include <span>
#include <string>

#include "dibc/evalgen.hpp"
#include "dibc/pipeline.hpp"

namespace dibc {

nlohmann::json config_to_json(const PipelineConfig& cfg);
/// Inverse of config_to_json; missing keys keep their defaults. Throws
/// ConfigError on malformed values.
PipelineConfig config_from_json(const nlohmann::json& j);

nlohmann::json metrics_to_json(const MetricsReport& m);

/// Step timings, traffic per message kind, candidate scores and warnings.
nlohmann::json diagnostics_to_json(const PipelineResult& result, const PipelineConfig& cfg,
                                   const std::optional<MetricsReport>& metrics);

/// Columns row,cluster,subcomponent with one-based labels.
void write_partition_csv(const std::string& path, std::span<const int> c, std::span<const int> s);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace dibc
