#include "bunching/manifest.hpp"

#include <fstream>
#include <stdexcept>

namespace bunching {

std::string_view version() noexcept { return BUNCHING_VERSION; }

nlohmann::json RunManifest::to_json() const {
    return nlohmann::json{{"command", command},
                          {"parameters", parameters},
                          {"seed", seed},
                          {"version", version()},
                          {"outputs", outputs},
                          {"wall_time_s", wall_time_s}};
}

std::filesystem::path manifest_path_for(const std::filesystem::path& result) {
    auto p = result;
    p += ".manifest.json";
    return p;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    out << manifest.to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
}

}  // namespace bunching
