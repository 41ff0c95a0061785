#pragma once

// Batch command-line front end: configuration parsing and the subcommands.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lqg/common.hpp"

namespace lqg::cli {

/// Malformed configuration; the message names the file/line or the field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat key -> raw value text. Ordered, so manifests are written in a fixed order.
using Settings = std::map<std::string, std::string>;

/// Parses a configuration document. A document starting with '{' is JSON:
/// either a flat object or a manifest written by this tool (its "config"
/// member is used). Anything else is key=value lines with '#' comments.
/// `source` is used in diagnostics.
Settings parse_settings(std::string_view text, const std::string& source);
Settings load_settings_file(const std::string& path);

/// Command recorded in a manifest document, empty otherwise.
std::string manifest_command(std::string_view text);

double parse_real(const std::string& key, const std::string& text);
long long parse_integer(const std::string& key, const std::string& text);
std::uint64_t parse_seed(const std::string& key, const std::string& text);
bool parse_bool(const std::string& key, const std::string& text);
/// "x,y" or "x y".
Point parse_point(const std::string& key, const std::string& text);
/// Comma-separated items; each is a number, a power "2^-3", or a range of
/// powers "2^-3..2^-7" (every integer exponent in between, in the given order).
std::vector<double> parse_real_list(const std::string& key, const std::string& text);
std::vector<std::string> parse_word_list(const std::string& text);

/// Entry point. Exit codes: 0 success, 2 invalid configuration or
/// arguments, 3 experiment-level failure, 1 internal error.
int run(int argc, char** argv);

}  // namespace lqg::cli
