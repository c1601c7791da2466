#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace ivhedge {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& file);

/// `git describe` of the source tree this library was built from.
std::string build_version();

/// Provenance record written next to every CLI output. Contains no timestamps,
/// so identical runs produce identical manifests.
struct RunManifest {
    std::string command;
    std::string config_json;  ///< resolved configuration, canonical JSON text
    std::map<std::string, std::string> input_hashes;   ///< role -> sha256
    std::map<std::string, std::string> output_hashes;  ///< file name -> sha256
    std::map<std::string, std::uint64_t> seeds;

    std::string to_json_text() const;
};

}  // namespace ivhedge
