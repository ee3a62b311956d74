#pragma once

#include <map>
#include <string>

#include "snad/autodiff.hpp"

namespace snad {

/// Writes every parameter as "<name>.snad" plus a "manifest.tsv" listing
/// name, shape, role and file, in set order.
void save_checkpoint(const std::string& dir, const ParameterSet& params);
/// Loads values into an existing set; names and shapes must match exactly.
void load_checkpoint(const std::string& dir, ParameterSet& params);

/// Flat key=value text files. Blank lines and '#' comments are ignored.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::string& path);
KeyValues parse_key_values(const std::string& text);
void write_key_values(const std::string& path, const KeyValues& kv);
std::string format_key_values(const KeyValues& kv);

}  // namespace snad
