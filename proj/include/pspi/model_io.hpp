#pragma once

#include "pspi/pmdp.hpp"
#include "pspi/solve.hpp"
#include "pspi/spibb.hpp"

#include <string>
#include <string_view>

namespace pspi {

/// Line-oriented model format:
///   pmdp <name> / gamma <q> / rmax <q> / param <x> / state <s> / split <s> /
///   initial <s> / action <a> / reward <s> <a> <q> / trans <s> <a> <s'> <poly>
/// `#` starts a comment. Throws ModelError with the offending line.
PMdp parse_pmdp(std::string_view text);
std::string serialize_pmdp(const PMdp& m);

/// `dataset <env> <seed>`, then `episode` and `step <s> <a> <s'>` lines.
Dataset parse_dataset(std::string_view text, const PMdp& m);
std::string serialize_dataset(const Dataset& d, const PMdp& m);

/// `policy <name>`, then `prob <s> <a> <p>` lines (absent entries are 0).
Policy parse_policy(std::string_view text, const PMdp& m);
std::string serialize_policy(const Policy& pi, const PMdp& m, const std::string& name = "policy");

/// "x=0.3,y=1/4" (commas or whitespace between entries).
Valuation parse_valuation(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace pspi
