#include <fracdecay/output.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <stdexcept>

namespace fracdecay::output {

// shortest text that parses back to the same double
std::string num(double x)
{
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string path_for(const config::RunConfig& cfg, const std::string& name)
{
    const std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    return (dir / (cfg.out_prefix + name)).string();
}

std::ofstream open(const std::string& path)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    return os;
}

void write_header(std::ostream& os, const Header& header, const config::RunConfig& cfg)
{
    os << "# fracdecay " << header.command << '\n';
    config::write_resolved(os, cfg, "# param ");
    for (const auto& [k, v] : header.results) os << "# result " << k << " = " << v << '\n';
    if (!header.columns.empty()) os << "# columns: " << header.columns << '\n';
}

} // namespace fracdecay::output
