#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ethlab {

struct Artifact {
    std::string path;  // relative to the run directory
    std::string sha256;
};

struct TaskRecord {
    std::string status = "pending";  // pending | done | skipped | failed
    double wall_seconds = 0.0;
    std::vector<Artifact> artifacts;
    std::string note;
};

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string code_version;
    std::map<std::string, TaskRecord> tasks;

    // Records the artifact and its checksum; path is taken relative to run_dir.
    void add_artifact(const std::string& task, const std::filesystem::path& run_dir, const std::filesystem::path& file);

    // True when the task is done and every artifact still matches its checksum.
    bool task_complete(const std::string& task, const std::filesystem::path& run_dir) const;

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);

    static std::filesystem::path path_in(const std::filesystem::path& run_dir) { return run_dir / "manifest.json"; }
    void save(const std::filesystem::path& run_dir) const;  // write-then-rename
    static RunManifest load(const std::filesystem::path& run_dir);
};

std::string code_version();

// Atomic text write through a temporary sibling file.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace ethlab
