#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace bunching {

std::string_view version() noexcept;

/// Provenance of one CLI run. Result files produced by the run are written
/// next to `<output>.manifest.json`; they contain no run-specific metadata, so
/// identical parameters and seed give byte-identical results.
struct RunManifest {
    std::string command;
    nlohmann::json parameters = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;

    nlohmann::json to_json() const;
};

/// Path of the manifest that accompanies a result file.
std::filesystem::path manifest_path_for(const std::filesystem::path& result);

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace bunching
