#pragma once

// JSON interchange for scheduling instances:
//   {delta_t, delta, offers:[{bs, capacity:[...], price:[...]}],
//    requests:[{id, origin, w, u0, alpha}]}
// An optional integer "slot" field sets the posting slot (default 0).

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cec/core.hpp"

namespace cec {

nlohmann::json instance_to_json(const SystemState& state);
SystemState instance_from_json(const nlohmann::json& doc);

SystemState load_instance(const std::filesystem::path& path);
void save_instance(const SystemState& state, const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace cec
