#pragma once

// Plain-text data files: a `#` header holding the command, every resolved
// parameter and the computed summary values, then whitespace-separated rows.

#include <fracdecay/config.hpp>

#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace fracdecay::output {

struct Header
{
    std::string command;
    std::vector<std::pair<std::string, std::string>> results;
    std::string columns;
};

/// shortest round-trip text
std::string num(double x);

/// out_dir / (prefix + name); creates out_dir if needed.
std::string path_for(const config::RunConfig& cfg, const std::string& name);

/// Throws std::runtime_error if the file cannot be created.
std::ofstream open(const std::string& path);

void write_header(std::ostream& os, const Header& header, const config::RunConfig& cfg);

} // namespace fracdecay::output
