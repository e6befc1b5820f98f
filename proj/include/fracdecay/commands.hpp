#pragma once

// The five pipeline commands behind the CLI. Each reads a resolved RunConfig,
// writes its data files under output.dir and returns their paths together
// with one-line summaries for the terminal.

#include <fracdecay/config.hpp>

#include <string>
#include <vector>

namespace fracdecay::commands {

struct Report
{
    std::vector<std::string> files;
    std::vector<std::string> summary;
};

Report bands(const config::RunConfig& cfg);
Report ldos(const config::RunConfig& cfg);
Report kbe_map(const config::RunConfig& cfg);
Report decay(const config::RunConfig& cfg);
Report df_scan(const config::RunConfig& cfg);

/// K_BE (scaled) and omega_BE / omega_eg used by decay and df-scan: the
/// configured values, or a band-edge fit when emitter.k_be_source = fit.
struct EdgeParameters
{
    double k_be = 10.0;
    double omega_be_normalized = 0.0;   // 2 pi c / a, only from a fit
};
EdgeParameters edge_parameters(const config::RunConfig& cfg);

} // namespace fracdecay::commands
