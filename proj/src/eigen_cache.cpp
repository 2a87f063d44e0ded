#include "ethlab/eigen_cache.hpp"

#include "ethlab/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <vector>

namespace ethlab {

namespace {

std::uint64_t swap_bytes(std::uint64_t v) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFFU);
    return r;
}

void write_le(std::ofstream& out, const double* data, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const auto bits = swap_bytes(std::bit_cast<std::uint64_t>(data[i]));
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
}

void read_le(std::ifstream& in, double* data, std::size_t n) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(swap_bytes(std::bit_cast<std::uint64_t>(data[i])));
    }
}

std::filesystem::path temp_sibling(const std::filesystem::path& p) {
    std::random_device rd;
    return p.string() + ".tmp" + std::to_string(rd());
}

}  // namespace

EigenCache::EigenCache(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path EigenCache::default_root() {
    if (const char* env = std::getenv("ETHLAB_CACHE"); env && *env) return env;
    return ".ethlab-cache";
}

bool EigenCache::contains(const std::string& key) const {
    return std::filesystem::exists(root_ / (key + ".bin")) && std::filesystem::exists(root_ / (key + ".json"));
}

std::optional<EigenDecomposition> EigenCache::load(const std::string& key) const {
    if (!contains(key)) return std::nullopt;
    nlohmann::json meta;
    {
        std::ifstream js(root_ / (key + ".json"));
        try {
            js >> meta;
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
    }
    const auto dim = meta.value("dim", std::size_t{0});
    const bool with_vectors = meta.value("vectors", true);
    const auto bin = root_ / (key + ".bin");
    const std::size_t expect = dim * (with_vectors ? dim + 1 : 1) * sizeof(double);
    if (dim == 0 || std::filesystem::file_size(bin) != expect) return std::nullopt;

    std::ifstream in(bin, std::ios::binary);
    EigenDecomposition eig;
    eig.energies.resize(static_cast<Eigen::Index>(dim));
    read_le(in, eig.energies.data(), dim);
    if (with_vectors) {
        eig.vectors.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        read_le(in, eig.vectors.data(), dim * dim);
    }
    if (!in) return std::nullopt;
    return eig;
}

void EigenCache::store(const std::string& key, const EigenDecomposition& eig, const nlohmann::json& params) const {
    std::filesystem::create_directories(root_);
    const auto bin = root_ / (key + ".bin");
    const auto js = root_ / (key + ".json");
    const bool with_vectors = eig.vectors.size() > 0;

    const auto tmp_bin = temp_sibling(bin);
    {
        std::ofstream out(tmp_bin, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write cache file " + tmp_bin.string());
        write_le(out, eig.energies.data(), eig.dim());
        // Eigen's default storage is column-major already.
        if (with_vectors) write_le(out, eig.vectors.data(), eig.dim() * eig.dim());
        if (!out) throw std::runtime_error("short write to " + tmp_bin.string());
    }
    nlohmann::json meta = {{"dim", eig.dim()},
                           {"model_hash", key},
                           {"vectors", with_vectors},
                           {"layout", "float64 little-endian: energies, then column-major eigenvectors"},
                           {"params", params}};
    const auto tmp_js = temp_sibling(js);
    {
        std::ofstream out(tmp_js, std::ios::trunc);
        out << meta.dump(2) << '\n';
    }
    // The binary lands first; an entry only counts once its sidecar exists.
    std::filesystem::rename(tmp_bin, bin);
    std::filesystem::rename(tmp_js, js);
}

}  // namespace ethlab
