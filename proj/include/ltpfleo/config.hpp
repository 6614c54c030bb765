#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltpfleo/event_log.hpp"
#include "ltpfleo/simulator.hpp"

namespace ltp {

// Bad configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "key = value" lines under "[section]" headers; keys become "section.key".
// '#' starts a comment. An empty value leaves the field at its default.
struct ConfigFile {
    std::map<std::string, std::string> values;
    std::string source = "<config>";
};

ConfigFile parse_config(std::istream& in, const std::string& source_name = "<config>");
ConfigFile load_config(const std::filesystem::path& path);
// "section.key=value"
void apply_override(ConfigFile& config, const std::string& assignment);

struct RunConfig {
    SimConfig sim;
    RunMode mode = RunMode::ltp;
    std::string canonical;  // every effective field, one "key=value" per line, schema order
    std::string hash;       // SHA-256 of canonical
};

// Resolves every field against the schema defaults; unknown keys and malformed values throw ConfigError.
RunConfig resolve_config(const ConfigFile& config);

// The documented schema with defaults, as a config file.
std::string default_config_text();

std::string sha256_hex(const std::string& data);

}  // namespace ltp
