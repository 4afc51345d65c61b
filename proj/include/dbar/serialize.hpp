#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "dbar/attack.hpp"
#include "dbar/eval.hpp"
#include "dbar/nn.hpp"
#include "dbar/oracle.hpp"
#include "dbar/policy.hpp"

namespace dbar {

using Json = nlohmann::ordered_json;

Json to_json(const Mlp& net);
Mlp mlp_from_json(const Json& j);

Json to_json(const MlpTarget& target);
MlpTarget target_from_json(const Json& j);

Json to_json(const GaussianPolicy& policy);
GaussianPolicy policy_from_json(const Json& j);

Json to_json(const AttackConfig& cfg);
Json to_json(const AttackReport& report);
Json to_json(const IterationStats& st);
Json to_json(const AsrRow& row);
Json to_json(const TransferResult& res);

/// Non-finite doubles are written as null and read back as +inf.
double json_number(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling then renames. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Throws IoError when unreadable and ParseError on malformed content.
Json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);

void save_target(const std::filesystem::path& path, const MlpTarget& target);
MlpTarget load_target(const std::filesystem::path& path);
void save_policy(const std::filesystem::path& path, const GaussianPolicy& policy);
GaussianPolicy load_policy(const std::filesystem::path& path);

}  // namespace dbar
