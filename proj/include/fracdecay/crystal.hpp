#pragma once

// FCC inverse-opal geometry: air spheres on the sites of an FCC lattice in a
// dielectric backbone. Lengths are in units of the cubic lattice constant a,
// wavevectors in units of 2*pi/a.

#include <fracdecay/types.hpp>

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fracdecay::crystal {

// Sphere radius at which nearest neighbours touch, a / (2 sqrt 2).
inline constexpr double touching_r_over_a = 0.35355339059327376;

// At R = a/2 the spheres cover the octahedral holes and the backbone is gone.
inline constexpr double max_r_over_a = 0.5;

inline constexpr double cell_volume = 0.25;   // primitive cell, units a^3
inline constexpr double bz_volume = 4.0;      // first Brillouin zone, units (2 pi / a)^3

struct LatticeSpec
{
    double a = 1.0;
    double r_over_a = 0.3436;
    double eps_backbone_real = 11.76;
    double eps_backbone_imag = 0.0;
    double eps_sphere = 1.0;

    /// Throws ConfigError for values outside the supported range.
    void validate() const;

    bool overlapping() const { return r_over_a > touching_r_over_a; }

    /// Volume fraction of a single sphere per primitive cell, (16 pi / 3)(R/a)^3.
    double sphere_fraction() const;

    cplx eps_backbone() const { return {eps_backbone_real, eps_backbone_imag}; }
};

/// Columns are a1, a2, a3 of the FCC primitive cell (units a).
mat3 primitive_vectors();

/// Columns are b1, b2, b3 with a_i . b_j = delta_ij (units 2 pi / a).
mat3 reciprocal_vectors();

/// Reciprocal lattice vectors in cubic integer coordinates are exactly the
/// integer triples whose entries are all even or all odd.
bool is_reciprocal_vector(const vec3i& g);

/// Primitive-basis coordinates m with G = sum m_j b_j.
vec3i to_primitive(const vec3i& g);

struct ReciprocalSet
{
    std::vector<vec3i> indices;
    mat3x g;

    int count() const { return static_cast<int>(indices.size()); }
    int max_norm2() const;
};

/// Smallest set of complete |G| shells holding at least target_count vectors,
/// ordered by |G| and then lexicographically.
ReciprocalSet build_reciprocal_set(int target_count);

/// |G|^2 of the first shell left out of `set` (units (2 pi / a)^2).
int next_shell_norm2(const ReciprocalSet& set);

/// Fourier coefficients eps(G) = (1/V) int_cell eps(r) exp(-i G.r) d^3r.
///
/// Non-overlapping spheres use the closed-form sphere form factor. Overlapping
/// spheres add a numerical correction: the multiply-covered lens volume is
/// sampled on a supersampled grid over the primitive cell, transformed by
/// separable direct sums and subtracted from the form-factor sum.
/// `uses_quadrature()` reports which path is active.
class DielectricFourier
{
public:
    DielectricFourier(const LatticeSpec& spec, int max_primitive_index = 0, int grid = 48,
                      int supersample = 4);

    cplx operator()(const vec3i& g) const;

    /// Real part of the permittivity only; this is what the Bloch operator uses.
    double real(const vec3i& g) const { return (*this)(g).real(); }

    /// Fourier coefficient of the backbone indicator function.
    double backbone_indicator(const vec3i& g) const;

    bool uses_quadrature() const { return m_quadrature; }
    const LatticeSpec& spec() const { return m_spec; }

private:
    double sphere_indicator(const vec3i& g) const;

    LatticeSpec m_spec;
    bool m_quadrature = false;
    int m_max_index = 0;
    std::vector<cplx> m_table;   // overlap excess coefficients, quadrature path only
};

/// Convenience wrapper; builds a DielectricFourier per call, so use the class
/// directly inside loops.
cplx epsilon_fourier(const LatticeSpec& spec, const vec3i& g);

/// Distance from r (units a) to the nearest FCC lattice site.
double distance_to_nearest_site(const vec3& r);

/// Monkhorst-Pack-style grid in the primitive reciprocal basis, folded into the
/// first Brillouin zone.
struct KMesh
{
    mat3x points;
    vecx weights;
    int resolution = 0;
    bool half_zone = false;

    int size() const { return static_cast<int>(weights.size()); }
};

KMesh build_kmesh(int resolution, bool half_zone);

/// Image of k in the first Brillouin zone (nearest reciprocal lattice point
/// subtracted).
vec3 fold_to_bz(const vec3& k);

/// True if |k| <= |k - G| for every G, up to `tol`.
bool in_first_bz(const vec3& k, double tol = 1e-12);

/// High-symmetry points of the FCC Brillouin zone: Gamma, X, W, L, K, U.
vec3 bz_point(std::string_view label);

/// The three inequivalent X points along the cube axes.
std::vector<vec3> x_points();

struct WignerSeitzPoint
{
    std::string label;
    vec3 position;
};

/// Real-space labels on the rhombic-dodecahedral Wigner-Seitz cell.
/// Defaults: Gamma = 0, H = (1/2)(1,0,0), P = (1/4)(1,1,1), N = (1/4)(1,1,0).
class WignerSeitzTable
{
public:
    WignerSeitzTable();

    void set(std::string_view label, const vec3& position);
    WignerSeitzPoint operator()(std::string_view label) const;
    bool contains(std::string_view label) const;

private:
    std::map<std::string, vec3, std::less<>> m_points;
};

WignerSeitzPoint ws_point(std::string_view label);

/// Accepts "Gamma", "G" and the Greek letter for the zone centre.
std::string canonical_label(std::string_view label);

} // namespace fracdecay::crystal
