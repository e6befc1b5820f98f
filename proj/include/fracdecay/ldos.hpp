#pragma once

// Projected local density of states from Bloch modes, the band-edge square
// root model and its absorptive broadening.
//
// Units: histogram frequencies are normalized (omega a / 2 pi c); densities
// are per unit angular frequency with a = c = 1, so the vacuum value is
// rho0(omega) = omega^2 / (3 pi^2) with omega = 2 pi * omega_n.

#include <fracdecay/crystal.hpp>
#include <fracdecay/pwe.hpp>
#include <fracdecay/types.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace fracdecay::ldos {

/// omega^2 / (3 pi^2) at normalized frequency omega_n.
double vacuum_ldos(double omega_n);

struct LdosHistogram
{
    vecx bin_edges;
    vecx values;
    vec3 r = vec3::Zero();
    vec3 orientation = vec3::UnitZ();   // zero vector marks the trace
    double reference_omega = 0.0;       // nonzero once scaled by rho0(reference)

    int bins() const { return static_cast<int>(values.size()); }
    double bin_width() const { return bin_edges[1] - bin_edges[0]; }
    double center(int i) const { return 0.5 * (bin_edges[i] + bin_edges[i + 1]); }

    /// sum values * width, in the units of `values`.
    double integral() const;
};

struct HistogramOptions
{
    double omega_min = 0.0;
    double omega_max = 1.0;
    double bin_width = 1e-3;
};

/// Modes at position r sorted into bins. Each column of `orientations` gives
/// one projected histogram; a zero column gives the unprojected trace.
/// `modes` must carry fields for every band that can land in the bin range.
std::vector<LdosHistogram> ldos_histograms(const vec3& r, const mat3x& orientations,
                                           const std::vector<pwe::BandSolution>& modes, const vecx& weights,
                                           const HistogramOptions& options);

LdosHistogram ldos_histogram(const vec3& r, const vec3& orientation, const std::vector<pwe::BandSolution>& modes,
                             const vecx& weights, const HistogramOptions& options);

struct MeshLdosOptions
{
    HistogramOptions histogram;
    int n_bands = 10;
    int first_band = 0;   // bands [first_band, n_bands) are projected
    unsigned threads = 0;
};

/// Streams the eigensolves over the mesh and never holds all fields at once.
/// Reduction is in k-index order, so the output is independent of `threads`.
std::vector<LdosHistogram> mesh_ldos(const pwe::DielectricMatrix& dielectric, const crystal::KMesh& mesh,
                                     const vec3& r, const mat3x& orientations, const MeshLdosOptions& options);

/// Divide by rho0(reference_omega_n).
void scale_to_vacuum(LdosHistogram& h, double reference_omega_n);

struct Pocket
{
    vec3 k_point = vec3::Zero();
    mat3 curvature = mat3::Zero();   // d^2 omega_n / dk^2, k in 2 pi / a
    std::vector<mat3x> fields;       // degenerate subspace at the pocket bottom
    mat3x q;
};

struct BandEdgeFit
{
    int band = 8;
    double omega_be = 0.0;           // normalized
    double spacing = 0.01;
    std::vector<Pocket> pockets;
};

struct BandEdgeOptions
{
    int band = 8;                    // 0-based; the ninth band
    double spacing = 0.01;           // stencil step in units 2 pi / a
    double degeneracy_tol = 1e-7;    // relative
    unsigned threads = 0;
};

/// Diagonal curvature from 5-point stencils along the cube axes through each
/// of the three inequivalent X points, plus the edge fields.
BandEdgeFit fit_band_edge(const pwe::DielectricMatrix& dielectric, const BandEdgeOptions& options);

/// Sum over the degenerate subspace of |e . E(r)|^2 (trace if e is zero).
double pocket_weight(const Pocket& pocket, const vec3& r, const vec3& orientation);

/// rho_BE = K sqrt(omega - omega_BE), densities per angular frequency, a = c = 1.
double k_be_physical(const BandEdgeFit& fit, const vec3& r, const vec3& orientation);

/// K in units rho0(omega_eg) / omega_eg^(1/2) with omega_eg = omega_BE.
double k_be_scaled(const BandEdgeFit& fit, const vec3& r, const vec3& orientation);

/// Closed-form K for one isotropic pocket omega = w0 + alpha |dk|^2 / 2 with
/// field weight w, in the same units as k_be_physical.
double isotropic_pocket_k(double alpha, double weight);

struct BandEdgeModel
{
    double omega_be = 1.0;   // scaled frequency omega / omega_eg
    double k_be = 10.0;      // scaled
};

struct LossModel
{
    double delta = 0.0;      // half width, same units as omega
    double f = 1.0;
    double eps_ratio = 0.0;  // eps_I / eps_R
    std::string alpha_label; // reporting only
};

/// delta = omega0 (eps_I / eps_R) f / 2.
LossModel loss_delta(const crystal::LatticeSpec& spec, double f, double omega0);

/// Lorentzian of half width delta convolved with K sqrt(x - omega_BE):
/// K Re sqrt(omega - omega_BE + i delta).
double broadened_ldos(const BandEdgeModel& model, const LossModel& loss, double omega);

/// The same convolution by adaptive quadrature; the cross-check route.
double broadened_ldos_quadrature(const BandEdgeModel& model, const LossModel& loss, double omega,
                                 double rel_tol = 1e-12);

struct PowerLawFit
{
    double exponent = 0.0;
    double prefactor = 0.0;       // of the free power law
    double sqrt_prefactor = 0.0;  // least squares with the exponent fixed at 1/2
    int points = 0;
};

/// Log-log least squares of values against (center - omega_be) over the bins
/// with centers in (omega_be, omega_be + window].
PowerLawFit fit_power_law(const LdosHistogram& h, double omega_be, double window);

void write_histograms(std::ostream& os, const std::vector<LdosHistogram>& hs);

} // namespace fracdecay::ldos
