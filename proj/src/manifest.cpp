#include "ivhedge/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include <json.hpp>

#include "ivhedge/csv.hpp"
#include "ivhedge/errors.hpp"

#ifndef IVHEDGE_GIT_DESCRIBE
#define IVHEDGE_GIT_DESCRIBE "unknown"
#endif

namespace ivhedge {

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw NumericalError("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& file) { return sha256_hex(read_text_file(file)); }

std::string build_version() { return IVHEDGE_GIT_DESCRIBE; }

std::string RunManifest::to_json_text() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(config_json);
    j["config_sha256"] = sha256_hex(config_json);
    j["inputs"] = input_hashes;
    j["outputs"] = output_hashes;
    j["seeds"] = seeds;
    j["version"] = build_version();
    return j.dump(2) + "\n";
}

}  // namespace ivhedge
