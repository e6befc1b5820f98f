#pragma once

// Run configuration: flat `section.key = value` text with `#` comments,
// layered as built-in defaults < preset < file < command-line overrides.

#include <fracdecay/crystal.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace fracdecay::config {

struct Entry
{
    std::string value;
    std::string origin;   // file name, "preset fig3", "--threads", ...
    int line = 0;         // 0 when not from a file

    std::string where() const;
};

class KeyValues
{
public:
    /// Throws ConfigError("<origin>:<line>: ...") on malformed lines and
    /// repeated keys.
    static KeyValues parse(std::istream& in, const std::string& origin);
    static KeyValues parse_file(const std::string& path);

    void set(const std::string& key, const std::string& value, const std::string& origin, int line = 0);

    /// Entries of `over` replace those here.
    void merge(const KeyValues& over);

    const Entry* find(const std::string& key) const;
    const std::map<std::string, Entry>& entries() const { return m_entries; }

private:
    std::map<std::string, Entry> m_entries;
};

const std::vector<std::string>& preset_names();

/// Throws ConfigError for an unknown name.
KeyValues preset(const std::string& name);

enum class Precision { real64, extended };
enum class ModelKind { band_edge, vacuum };
enum class KbeSource { direct, fit };

struct RunConfig
{
    std::string figure;

    crystal::LatticeSpec lattice;
    crystal::WignerSeitzTable positions;
    std::map<std::string, vec3> position_overrides;

    int basis_count = 169;        // histogram and band runs
    int edge_basis_count = 531;   // band-edge fit
    int kmesh_resolution = 12;
    bool kmesh_half_zone = true;

    std::vector<std::string> band_path{"Gamma", "X", "W", "L", "Gamma", "K"};
    int band_points_per_segment = 16;
    int band_count = 12;
    bool band_on_mesh = false;

    std::string ldos_position = "H";
    std::vector<std::string> ldos_orientations{"z", "x", "y"};
    double ldos_omega_min = 0.74;
    double ldos_omega_max = 0.80;
    double ldos_bin_width = 5e-4;
    int ldos_first_band = 8;      // 1-based, inclusive
    int ldos_last_band = 10;
    double ldos_fit_window = 0.004;
    bool ldos_vacuum_units = true;
    int ldos_analytic_points = 400;

    int edge_band = 9;            // 1-based
    double edge_spacing = 0.01;
    double edge_degeneracy_tol = 1e-7;

    std::vector<double> loss_delta{0.0};          // delta / omega
    std::vector<std::string> loss_alpha_label;    // reporting only
    double loss_f = 1.0;

    ModelKind model = ModelKind::band_edge;
    double beta = 5.5e-8;
    double omega_eg = 1.3e15;
    double detuning = 1.0;
    double k_be = 10.0;
    KbeSource k_be_source = KbeSource::direct;
    std::string k_be_orientation = "z";

    bool background = true;
    double cutoff = 1e5;
    double t_max = 1e9;
    int n_times = 400;
    double omega_lo = 0.9;
    double omega_hi = 1.1;
    int points_per_decade = 24;
    double aux_width = 1e-5;
    Precision precision = Precision::real64;

    double df_beta_k_min = 1e-8;
    double df_beta_k_max = 1e-5;
    int df_points = 10;
    double df_detuning_lo = 1.0 - 1e-4;
    double df_detuning_hi = 1.0 + 1e-5;
    double df_tol = 1e-9;

    std::vector<std::string> kbe_path{"Gamma", "H", "P", "Gamma", "N", "H"};
    int kbe_points_per_segment = 20;
    std::vector<std::string> kbe_orientations{"z", "x", "y"};
    std::vector<double> kbe_sweep;
    int kbe_sweep_basis = 169;

    unsigned threads = 0;
    std::string out_dir = ".";
    std::string out_prefix;
};

/// Typed, range-checked resolution of merged key-values. Unknown keys and
/// bad values throw ConfigError naming the originating line.
RunConfig resolve(const KeyValues& kv);

/// The fully resolved parameter set, one `key = value` per line; parsing it
/// back reproduces the same RunConfig.
void write_resolved(std::ostream& os, const RunConfig& cfg, const std::string& prefix = "");

/// "H", "Gamma" or three coordinates in units of a.
vec3 parse_position(const RunConfig& cfg, const std::string& text);

/// "x", "y", "z", "trace" or three components.
vec3 parse_orientation(const std::string& text);

} // namespace fracdecay::config
