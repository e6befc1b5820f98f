#pragma once

// Emitter amplitude in the scaled-frequency domain. With w = omega / omega_eg,
//
//   c_e(w) = 1 / D(w),   D(w) = beta G(w) - i (w - 1),
//   G(w)   = i w int_0^C rho(x) / (x^2 (w - x)) dx,
//
// where rho is the LDOS relative to rho0(omega_eg). G is defined in the upper
// half plane; below the real axis it is continued across the cut.

#include <fracdecay/types.hpp>

#include <complex>
#include <string>
#include <vector>

namespace fracdecay::dynamics {

inline constexpr double window_lo = 0.95;
inline constexpr double window_hi = 1.01;
inline constexpr double default_cutoff = 1e5;

template <class Real>
using complex_t = std::complex<Real>;

struct EmitterSpec
{
    double beta = 5.5e-8;
    double omega_eg = 1.3e15;   // s^-1, only for converting times
    double detuning = 1.0;      // omega_BE / omega_eg
    double k_be = 10.0;         // units rho0(omega_eg) / omega_eg^(1/2)

    void validate() const;
};

/// rho(x) = x^2 on [x0, x1], or kappa sqrt(x - c) on [x0, x1] with the
/// principal root. A pair of conjugate c gives the Lorentzian-broadened edge
/// K Re sqrt(x - w_BE + i delta).
template <class Real>
struct Segment
{
    enum class Kind { vacuum, sqrt_edge } kind = Kind::vacuum;
    Real x0 = 0, x1 = 0;
    complex_t<Real> c{};
    Real kappa = 0;
};

template <class Real>
class SpectralModel
{
public:
    /// Vacuum outside [0.95, 1.01] (unless background is off) and the band
    /// edge K sqrt(w - w_BE), broadened by delta, inside.
    static SpectralModel band_edge(Real omega_be, Real k_be, Real delta, bool background = true,
                                   Real cutoff = Real(default_cutoff));

    /// rho = w^2 on [0, cutoff].
    static SpectralModel vacuum(Real cutoff = Real(default_cutoff));

    /// rho = 0.
    static SpectralModel none();

    Real density(Real x) const;

    /// Continuation of the density from the upper half plane, used for the
    /// jump across the cut at Re w.
    complex_t<Real> density_continued(complex_t<Real> w) const;

    const std::vector<Segment<Real>>& segments() const { return m_segments; }
    Real omega_be() const { return m_omega_be; }
    Real delta() const { return m_delta; }
    Real k_be() const { return m_k_be; }
    Real cutoff() const { return m_cutoff; }
    bool has_edge() const { return m_has_edge; }
    bool background() const { return m_background; }

    /// Sorted segment boundaries and edge features, for quadrature panels.
    std::vector<Real> breakpoints() const;

private:
    std::vector<Segment<Real>> m_segments;
    Real m_omega_be = 1, m_delta = 0, m_k_be = 0, m_cutoff = Real(default_cutoff);
    bool m_has_edge = false, m_background = true;
};

/// Closed-form G for Im w >= 0; real w is the limit from above.
template <class Real>
complex_t<Real> g_function(const SpectralModel<Real>& model, complex_t<Real> w);

template <class Real>
complex_t<Real> g_derivative(const SpectralModel<Real>& model, complex_t<Real> w);

/// G for Im w >= 0 by adaptive quadrature, subtracting the 1/(w - x)
/// singularity in the segment that holds Re w. Independent of the closed form.
template <class Real>
complex_t<Real> g_quadrature(const SpectralModel<Real>& model, complex_t<Real> w, double rel_tol = 1e-12);

/// G continued below the real axis: G(w) = -conj G(conj w) + 2 pi rho(w) / w.
template <class Real>
complex_t<Real> analytic_continuation(const SpectralModel<Real>& model, complex_t<Real> w);

template <class Real>
complex_t<Real> analytic_continuation_derivative(const SpectralModel<Real>& model, complex_t<Real> w);

/// G on the sheet reached from the upper half plane: g_function above the
/// axis, analytic_continuation below.
template <class Real>
complex_t<Real> g_sheet(const SpectralModel<Real>& model, complex_t<Real> w);

template <class Real>
complex_t<Real> g_sheet_derivative(const SpectralModel<Real>& model, complex_t<Real> w);

/// Emitter spectrum 1 / (beta G - i (w - 1)) on the same sheet.
template <class Real>
complex_t<Real> spectrum(const SpectralModel<Real>& model, Real beta, complex_t<Real> w);

template <class Real>
struct PoleResult
{
    complex_t<Real> omega0{};
    complex_t<Real> residual{};
    Real strength = 0;
    bool bound = false;          // real root inside the gap
    int iterations = 0;
    bool strength_above_one = false;
};

template <class Real>
PoleResult<Real> find_pole(const EmitterSpec& emitter, const SpectralModel<Real>& model);

/// Lossless edge at the emitter's detuning, background on, given delta.
template <class Real>
SpectralModel<Real> model_for(const EmitterSpec& emitter, Real delta, bool background = true);

template <class Real>
Real fractional_strength(const EmitterSpec& emitter, const SpectralModel<Real>& model);

/// a_-1 by a small-circle contour integral of the spectrum around omega0.
template <class Real>
complex_t<Real> contour_residual(const SpectralModel<Real>& model, Real beta, complex_t<Real> omega0, Real radius,
                                 int nodes = 64);

struct DecayOptions
{
    double t_max = 1e9;          // units 1 / omega_eg
    int n_times = 400;
    double omega_lo = 0.9;
    double omega_hi = 1.1;
    double aux_width = 1e-5;     // width of the auxiliary pole removing the 1/w tail
    int points_per_decade = 24;
    double population_tol = 1e-3;
};

struct DecayCurve
{
    std::vector<double> times;
    std::vector<double> population;
    std::vector<double> pole_part;
    double population0 = 1.0;
    std::complex<double> omega0;
    double strength = 1.0;
};

/// c(t) = -i a e^{-i w0 t} - i B e^{-i ws t} + (1/2 pi) int R(w) e^{-i w t} dw,
/// B = i - a, R the remainder after both poles, integrated with
/// piecewise-linear Filon weights on a grid clustered at the features.
template <class Real>
DecayCurve decay_curve(const EmitterSpec& emitter, const SpectralModel<Real>& model, const DecayOptions& options);

struct DetuningResult
{
    double d_f = 1.0;
    double detuning = 1.0;
    double lo = 0.0, hi = 0.0;   // final search interval
    int evaluations = 0;
    bool widened = false;
    std::vector<std::string> warnings;
};

struct DetuningOptions
{
    double lo = 1.0 - 1e-4;
    double hi = 1.0 + 1e-5;
    double tol = 1e-9;
    int max_widen = 4;
};

/// Golden-section minimum of |a_-1|^2 over omega_BE / omega_eg.
template <class Real>
DetuningResult optimize_detuning(const EmitterSpec& emitter, Real delta, bool background,
                                 const DetuningOptions& options);

} // namespace fracdecay::dynamics
