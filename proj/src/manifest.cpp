#include "ethlab/manifest.hpp"

#include "ethlab/errors.hpp"
#include "ethlab/hash.hpp"

#include <fstream>

namespace ethlab {

using nlohmann::json;

std::string code_version() { return std::string("ethlab ") + ETHLAB_VERSION; }

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

void RunManifest::add_artifact(const std::string& task, const std::filesystem::path& run_dir,
                               const std::filesystem::path& file) {
    tasks[task].artifacts.push_back(
        {std::filesystem::relative(file, run_dir).generic_string(), sha256_file(file)});
}

bool RunManifest::task_complete(const std::string& task, const std::filesystem::path& run_dir) const {
    const auto it = tasks.find(task);
    if (it == tasks.end() || (it->second.status != "done" && it->second.status != "skipped")) return false;
    for (const auto& a : it->second.artifacts) {
        const auto p = run_dir / a.path;
        if (!std::filesystem::exists(p) || sha256_file(p) != a.sha256) return false;
    }
    return true;
}

json RunManifest::to_json() const {
    json t = json::object();
    for (const auto& [id, rec] : tasks) {
        json arts = json::array();
        for (const auto& a : rec.artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}});
        t[id] = {{"status", rec.status}, {"wall_seconds", rec.wall_seconds}, {"artifacts", arts}, {"note", rec.note}};
    }
    return {{"command", command}, {"config_hash", config_hash}, {"code_version", code_version}, {"tasks", t}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    try {
        m.command = j.value("command", "");
        m.config_hash = j.at("config_hash").get<std::string>();
        m.code_version = j.at("code_version").get<std::string>();
        for (const auto& [id, rec] : j.at("tasks").items()) {
            TaskRecord r;
            r.status = rec.value("status", "pending");
            r.wall_seconds = rec.value("wall_seconds", 0.0);
            r.note = rec.value("note", "");
            for (const auto& a : rec.value("artifacts", json::array()))
                r.artifacts.push_back({a.at("path").get<std::string>(), a.at("sha256").get<std::string>()});
            m.tasks[id] = std::move(r);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void RunManifest::save(const std::filesystem::path& run_dir) const {
    write_text_atomic(path_in(run_dir), to_json().dump(2) + "\n");
}

RunManifest RunManifest::load(const std::filesystem::path& run_dir) {
    std::ifstream in(path_in(run_dir));
    if (!in) throw ConfigError("no manifest in " + run_dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse manifest in " + run_dir.string() + ": " + e.what());
    }
    return from_json(j);
}

}  // namespace ethlab
