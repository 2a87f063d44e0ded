#pragma once

#include "ethlab/eigensolver.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace ethlab {

// On-disk store for eigendecompositions. Each entry is <key>.bin holding
// little-endian float64 energies followed by the column-major eigenvector
// matrix, plus <key>.json describing it. Writes go through a temporary file
// and a rename, so readers never observe a partial entry. One writer per
// directory is assumed.
class EigenCache {
public:
    explicit EigenCache(std::filesystem::path root);

    // Root from $ETHLAB_CACHE, falling back to ./.ethlab-cache.
    static std::filesystem::path default_root();

    const std::filesystem::path& root() const { return root_; }
    bool contains(const std::string& key) const;
    std::optional<EigenDecomposition> load(const std::string& key) const;
    void store(const std::string& key, const EigenDecomposition& eig, const nlohmann::json& params) const;

private:
    std::filesystem::path root_;
};

}  // namespace ethlab
