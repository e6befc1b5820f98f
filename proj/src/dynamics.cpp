#include <fracdecay/dynamics.hpp>
#include <fracdecay/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace fracdecay::dynamics {

void EmitterSpec::validate() const
{
    if (!(beta > 0.0)) throw ConfigError("emitter.beta must be positive");
    if (!(omega_eg > 0.0)) throw ConfigError("emitter.omega_eg must be positive");
    if (!(k_be >= 0.0)) throw ConfigError("emitter.k_be must be non-negative");
    if (!(detuning > window_lo && detuning < window_hi))
        throw ConfigError("emitter.detuning must lie inside the band-edge window (0.95, 1.01)");
}

namespace {

template <class Real>
using C = complex_t<Real>;

template <class Real>
constexpr Real pi_r = pi_v<Real>;

// Real arguments are taken as the limit from above.
template <class Real>
C<Real> upper(C<Real> w)
{
    if (w.imag() == Real(0)) return {w.real(), Real(0)};
    return w;
}

template <class Real>
C<Real> log_ratio(C<Real> w, Real x0, Real x1)
{
    return std::log(w - x0) - std::log(w - x1);
}

template <class Real>
C<Real> log_ratio_derivative(C<Real> w, Real x0, Real x1)
{
    return Real(1) / (w - x0) - Real(1) / (w - x1);
}

// int_{x0}^{x1} sqrt(x - c) / (w - x) dx and its w-derivative. With
// s = sqrt(x - c), r = sqrt(w - c):
//   I = r L - [2 s - 2 r ln(s + r)]_{x0}^{x1},
// where the sign of r is chosen so that r and s(x*) point into the same half
// plane at the point x* of the segment closest to Re w; the principal logs
// are then continuous along the segment.
template <class Real>
struct SqrtIntegral
{
    C<Real> value, derivative;
};

template <class Real>
SqrtIntegral<Real> sqrt_integral(C<Real> w, C<Real> c, Real x0, Real x1)
{
    const Real xs = std::clamp(w.real(), x0, x1);
    const C<Real> sref = std::sqrt(C<Real>(xs) - c);
    C<Real> r = std::sqrt(w - c);
    if ((r * std::conj(sref)).real() < Real(0)) r = -r;
    const C<Real> s0 = std::sqrt(C<Real>(x0) - c), s1 = std::sqrt(C<Real>(x1) - c);
    const C<Real> l = log_ratio(w, x0, x1);
    const C<Real> ln0 = std::log(s0 + r), ln1 = std::log(s1 + r);
    SqrtIntegral<Real> out;
    out.value = r * l - (Real(2) * (s1 - s0) - Real(2) * r * (ln1 - ln0));
    out.derivative = l / (Real(2) * r) + r * log_ratio_derivative(w, x0, x1) +
                     (ln1 / r + Real(1) / (s1 + r)) - (ln0 / r + Real(1) / (s0 + r));
    return out;
}

// Segment term S(w) = int rho(x) / (x^2 (w - x)) dx and S'(w).
template <class Real>
void segment_term(const Segment<Real>& seg, C<Real> w, C<Real>& s, C<Real>& ds)
{
    if (seg.kind == Segment<Real>::Kind::vacuum) {
        s = log_ratio(w, seg.x0, seg.x1);
        ds = log_ratio_derivative(w, seg.x0, seg.x1);
        return;
    }
    // 1/(x^2 (w - x)) = 1/(w x^2) + 1/(w^2 x) + 1/(w^2 (w - x))
    const auto at0 = sqrt_integral<Real>(C<Real>(Real(0), Real(0)), seg.c, seg.x0, seg.x1);
    const C<Real> j1 = -at0.value;        // int sqrt / x
    const C<Real> j2 = -at0.derivative;   // int sqrt / x^2
    const auto iw = sqrt_integral(w, seg.c, seg.x0, seg.x1);
    const C<Real> w2 = w * w;
    s = seg.kappa * ((j1 + iw.value) / w2 + j2 / w);
    ds = seg.kappa * (-Real(2) * (j1 + iw.value) / (w2 * w) + iw.derivative / w2 - j2 / w2);
}

template <class Real>
void g_closed(const SpectralModel<Real>& model, C<Real> w, C<Real>& g, C<Real>& dg)
{
    C<Real> sum(0), dsum(0);
    for (const auto& seg : model.segments()) {
        C<Real> s, ds;
        segment_term(seg, w, s, ds);
        sum += s;
        dsum += ds;
    }
    const C<Real> i(0, 1);
    g = i * w * sum;
    dg = i * sum + i * w * dsum;
}

// sqrt of z = x - c continued downward from the real x axis.
template <class Real>
C<Real> sqrt_continued(C<Real> z, C<Real> c)
{
    C<Real> r = std::sqrt(z);
    if (c.imag() < Real(0) && z.imag() < Real(0) && z.real() < Real(0)) r = -r;
    return r;
}

template <class Real>
const Segment<Real>* segment_at(const SpectralModel<Real>& model, Real x, std::vector<const Segment<Real>*>& out)
{
    out.clear();
    for (const auto& seg : model.segments())
        if (x > seg.x0 && x < seg.x1) out.push_back(&seg);
    return out.empty() ? nullptr : out.front();
}

} // namespace

template <class Real>
SpectralModel<Real> SpectralModel<Real>::band_edge(Real omega_be, Real k_be, Real delta, bool background, Real cutoff)
{
    const Real lo = Real(window_lo), hi = Real(window_hi);
    if (!(omega_be > lo && omega_be < hi))
        throw ConfigError("band edge must lie inside the analysis window (0.95, 1.01)");
    if (delta < Real(0)) throw ConfigError("loss width must be non-negative");
    if (k_be < Real(0)) throw ConfigError("k_be must be non-negative");
    if (!(cutoff > hi)) throw ConfigError("cutoff must exceed the analysis window");
    SpectralModel m;
    m.m_omega_be = omega_be;
    m.m_k_be = k_be;
    m.m_delta = delta;
    m.m_cutoff = cutoff;
    m.m_has_edge = true;
    m.m_background = background;
    using K = typename Segment<Real>::Kind;
    if (background) {
        m.m_segments.push_back({K::vacuum, Real(0), lo, {}, Real(1)});
        m.m_segments.push_back({K::vacuum, hi, cutoff, {}, Real(1)});
    }
    if (k_be > Real(0)) {
        if (delta == Real(0)) {
            m.m_segments.push_back({K::sqrt_edge, omega_be, hi, C<Real>(omega_be, Real(0)), k_be});
        } else {
            // K Re sqrt(x - w_BE + i delta) = (K/2)[sqrt(x - c1) + sqrt(x - c2)]
            m.m_segments.push_back({K::sqrt_edge, lo, hi, C<Real>(omega_be, -delta), k_be / 2});
            m.m_segments.push_back({K::sqrt_edge, lo, hi, C<Real>(omega_be, delta), k_be / 2});
        }
    }
    return m;
}

template <class Real>
SpectralModel<Real> SpectralModel<Real>::vacuum(Real cutoff)
{
    SpectralModel m;
    m.m_cutoff = cutoff;
    m.m_segments.push_back({Segment<Real>::Kind::vacuum, Real(0), cutoff, {}, Real(1)});
    return m;
}

template <class Real>
SpectralModel<Real> SpectralModel<Real>::none()
{
    SpectralModel m;
    m.m_background = false;
    return m;
}

template <class Real>
Real SpectralModel<Real>::density(Real x) const
{
    Real rho = 0;
    for (const auto& seg : m_segments) {
        if (x < seg.x0 || x > seg.x1) continue;
        if (seg.kind == Segment<Real>::Kind::vacuum) {
            rho += x * x;
        } else {
            rho += seg.kappa * std::sqrt(C<Real>(x) - seg.c).real();
        }
    }
    return rho;
}

template <class Real>
C<Real> SpectralModel<Real>::density_continued(C<Real> w) const
{
    C<Real> rho(0);
    for (const auto& seg : m_segments) {
        if (!(w.real() > seg.x0 && w.real() < seg.x1)) continue;
        if (seg.kind == Segment<Real>::Kind::vacuum) {
            rho += w * w;
        } else {
            rho += seg.kappa * sqrt_continued(w - seg.c, seg.c);
        }
    }
    return rho;
}

template <class Real>
std::vector<Real> SpectralModel<Real>::breakpoints() const
{
    std::vector<Real> b;
    for (const auto& seg : m_segments) {
        b.push_back(seg.x0);
        b.push_back(seg.x1);
    }
    if (m_has_edge) b.push_back(m_omega_be);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
}

template <class Real>
C<Real> g_function(const SpectralModel<Real>& model, C<Real> w)
{
    if (w.imag() < Real(0)) throw NumericalError("g_function is defined for Im w >= 0; use analytic_continuation");
    C<Real> g, dg;
    g_closed(model, upper(w), g, dg);
    return g;
}

template <class Real>
C<Real> g_derivative(const SpectralModel<Real>& model, C<Real> w)
{
    if (w.imag() < Real(0)) throw NumericalError("g_derivative is defined for Im w >= 0");
    C<Real> g, dg;
    g_closed(model, upper(w), g, dg);
    return dg;
}

template <class Real>
C<Real> g_quadrature(const SpectralModel<Real>& model, C<Real> w, double rel_tol)
{
    if (w.imag() < Real(0)) throw NumericalError("g_quadrature is defined for Im w >= 0");
    w = upper(w);
    const Real wr = w.real(), eta = w.imag();
    for (const auto& seg : model.segments())
        if (wr == seg.x0 || wr == seg.x1)
            if (eta == Real(0)) throw NumericalError("G requested on an integration endpoint");

    C<Real> total(0);
    for (const auto& seg : model.segments()) {
        const bool lossless_root =
            seg.kind == Segment<Real>::Kind::sqrt_edge && seg.c.imag() == Real(0) && seg.c.real() == seg.x0;
        auto phi = [&](Real x) -> C<Real> {
            if (seg.kind == Segment<Real>::Kind::vacuum) return C<Real>(Real(1));
            return seg.kappa * std::sqrt(C<Real>(x) - seg.c) / (x * x);
        };
        const bool inside = wr > seg.x0 && wr < seg.x1;
        const C<Real> pivot = inside ? phi(wr) : C<Real>(0);

        // Panels in x: ends, the pivot and geometric refinement around it and
        // around the edge features.
        std::vector<Real> xb{seg.x0, seg.x1};
        auto add = [&](Real x) {
            if (x > seg.x0 && x < seg.x1) xb.push_back(x);
        };
        const Real len = seg.x1 - seg.x0;
        if (inside) {
            add(wr);
            for (Real h = std::max(eta, Real(1e-15) * std::max(Real(1), std::abs(wr))); h < len; h *= Real(8)) {
                add(wr - h);
                add(wr + h);
            }
        }
        if (seg.kind == Segment<Real>::Kind::sqrt_edge) {
            const Real b = seg.c.real(), d = std::abs(seg.c.imag());
            add(b);
            for (Real h = std::max(d, Real(1e-14)); h < len; h *= Real(8)) {
                add(b - h);
                add(b + h);
            }
        }
        if (seg.x0 >= Real(0) && seg.x1 / std::max(seg.x0, Real(1e-3)) > Real(20)) {
            for (Real x = std::max(seg.x0, Real(1e-3)) * Real(4); x < seg.x1; x *= Real(4)) add(x);
            add(Real(1e-3));
        }
        std::sort(xb.begin(), xb.end());
        xb.erase(std::unique(xb.begin(), xb.end()), xb.end());

        // The subtracted integrand is finite at x = Re w; a node landing there
        // exactly contributes a set of measure zero.
        auto integrand = [&](Real x) -> C<Real> {
            const C<Real> den = w - x;
            return den == C<Real>(0) ? C<Real>(0) : (phi(x) - pivot) / den;
        };
        C<Real> part;
        if (lossless_root) {
            // x = b + s^2 removes the square-root endpoint.
            std::vector<Real> sb;
            for (Real x : xb) sb.push_back(std::sqrt(std::max(x - seg.x0, Real(0))));
            std::sort(sb.begin(), sb.end());
            sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
            part = quad::integrate(
                       [&](Real s) -> C<Real> {
                           const Real x = seg.x0 + s * s;
                           const C<Real> ph = s == Real(0) ? C<Real>(0) : seg.kappa * s / (x * x);
                           const C<Real> den = w - x;
                           return den == C<Real>(0) ? C<Real>(0) : Real(2) * s * (ph - pivot) / den;
                       },
                       sb, rel_tol, 0.0)
                       .value;
        } else {
            part = quad::integrate(integrand, xb, rel_tol, 0.0).value;
        }
        if (inside) part += pivot * log_ratio(w, seg.x0, seg.x1);
        total += part;
    }
    return C<Real>(0, 1) * w * total;
}

template <class Real>
C<Real> analytic_continuation(const SpectralModel<Real>& model, C<Real> w)
{
    if (w.imag() >= Real(0)) return g_function(model, w);
    const C<Real> mirror = std::conj(g_function(model, std::conj(w)));
    return -mirror + Real(2) * pi_r<Real> * model.density_continued(w) / w;
}

template <class Real>
C<Real> analytic_continuation_derivative(const SpectralModel<Real>& model, C<Real> w)
{
    if (w.imag() >= Real(0)) return g_derivative(model, w);
    const C<Real> mirror = std::conj(g_derivative(model, std::conj(w)));
    // d/dw of 2 pi rho(w) / w
    C<Real> rho(0), drho(0);
    for (const auto& seg : model.segments()) {
        if (!(w.real() > seg.x0 && w.real() < seg.x1)) continue;
        if (seg.kind == Segment<Real>::Kind::vacuum) {
            rho += w * w;
            drho += Real(2) * w;
        } else {
            const C<Real> r = sqrt_continued(w - seg.c, seg.c);
            rho += seg.kappa * r;
            drho += seg.kappa / (Real(2) * r);
        }
    }
    return -mirror + Real(2) * pi_r<Real> * (drho / w - rho / (w * w));
}

template <class Real>
C<Real> g_sheet(const SpectralModel<Real>& model, C<Real> w)
{
    return w.imag() >= Real(0) ? g_function(model, w) : analytic_continuation(model, w);
}

template <class Real>
C<Real> g_sheet_derivative(const SpectralModel<Real>& model, C<Real> w)
{
    return w.imag() >= Real(0) ? g_derivative(model, w) : analytic_continuation_derivative(model, w);
}

template <class Real>
C<Real> spectrum(const SpectralModel<Real>& model, Real beta, C<Real> w)
{
    return Real(1) / (beta * g_sheet(model, w) - C<Real>(0, 1) * (w - Real(1)));
}

template <class Real>
SpectralModel<Real> model_for(const EmitterSpec& emitter, Real delta, bool background)
{
    return SpectralModel<Real>::band_edge(Real(emitter.detuning), Real(emitter.k_be), delta, background);
}

namespace {

template <class Real>
C<Real> characteristic(const SpectralModel<Real>& model, Real beta, C<Real> w)
{
    return beta * g_sheet(model, w) - C<Real>(0, 1) * (w - Real(1));
}

template <class Real>
C<Real> characteristic_derivative(const SpectralModel<Real>& model, Real beta, C<Real> w)
{
    return beta * g_sheet_derivative(model, w) - C<Real>(0, 1);
}

// Real root of Im D on (lo, b) for a lossless edge: Im D is strictly
// decreasing there, so bisection to full precision is safe.
template <class Real>
bool bound_state(const SpectralModel<Real>& model, Real beta, Real& root, int& iterations)
{
    if (!model.has_edge() || model.delta() != Real(0)) return false;
    const Real b = model.omega_be();
    const Real eps = std::numeric_limits<Real>::epsilon();
    auto h = [&](Real x) { return characteristic(model, beta, C<Real>(x, Real(0))).imag(); };
    Real hi = b * (Real(1) - Real(4) * eps);
    if (!(h(hi) < Real(0))) return false;
    const Real floor = model.background() ? Real(window_lo) : Real(0);
    Real lo = hi;
    for (Real step = Real(16) * eps; ; step *= Real(2)) {
        lo = b - step;
        if (lo <= floor) {
            lo = floor + (b - floor) * Real(1e-6);
            if (!(h(lo) > Real(0))) throw NumericalError("bound-state bracket: no sign change inside the gap");
            break;
        }
        if (h(lo) > Real(0)) break;
    }
    iterations = 0;
    while (hi - lo > Real(2) * eps * std::abs(hi) && iterations < 400) {
        const Real mid = (lo + hi) / 2;
        if (!(mid > lo && mid < hi)) break;
        if (h(mid) > Real(0)) lo = mid; else hi = mid;
        ++iterations;
    }
    root = (lo + hi) / 2;
    return true;
}

template <class Real>
bool newton(const SpectralModel<Real>& model, Real beta, C<Real>& w, int& iterations)
{
    const Real tol = Real(64) * std::numeric_limits<Real>::epsilon();
    C<Real> f = characteristic(model, beta, w);
    for (iterations = 0; iterations < 200; ++iterations) {
        const C<Real> step = f / characteristic_derivative(model, beta, w);
        if (!std::isfinite(static_cast<double>(std::abs(step)))) return false;
        Real lambda = 1;
        C<Real> trial;
        C<Real> ft;
        for (int halvings = 0;; ++halvings) {
            trial = w - lambda * step;
            ft = characteristic(model, beta, trial);
            if (std::abs(ft) < std::abs(f) || halvings > 50) break;
            lambda /= 2;
        }
        const Real moved = std::abs(trial - w);
        w = trial;
        f = ft;
        if (moved < tol || f == C<Real>(0)) return true;
    }
    return false;
}

} // namespace

template <class Real>
PoleResult<Real> find_pole(const EmitterSpec& emitter, const SpectralModel<Real>& model)
{
    const Real beta = Real(emitter.beta);
    PoleResult<Real> res;

    Real real_root = 0;
    int it = 0;
    const bool has_bound = bound_state(model, beta, real_root, it);

    C<Real> w;
    if (has_bound) {
        w = C<Real>(real_root, Real(0));
        res.bound = true;
        res.iterations = it;
    } else {
        C<Real> seed(1, 0);
        if (model.has_edge() && model.delta() > Real(0)) {
            // Seed from the lossless problem at the same detuning.
            const auto lossless = SpectralModel<Real>::band_edge(model.omega_be(), model.k_be(), Real(0),
                                                                 model.background(), model.cutoff());
            Real r0;
            int i0;
            if (bound_state(lossless, beta, r0, i0)) {
                seed = C<Real>(r0, Real(0));
            } else {
                seed = C<Real>(1, 0);
                for (int k = 0; k < 60; ++k) seed = Real(1) - C<Real>(0, 1) * beta * g_sheet(lossless, seed);
            }
        } else {
            for (int k = 0; k < 60; ++k) seed = Real(1) - C<Real>(0, 1) * beta * g_sheet(model, seed);
        }
        w = seed;
        int nit = 0;
        if (!newton(model, beta, w, nit)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "pole search did not converge (last w = %.15g %+.3e i, |D| = %.3e)",
                          static_cast<double>(w.real()), static_cast<double>(w.imag()),
                          static_cast<double>(std::abs(characteristic(model, beta, w))));
            throw NumericalError(buf);
        }
        res.iterations = nit;
        if (w.imag() > Real(0) && w.imag() > Real(1e-12))
            throw NumericalError("pole search converged to a growing solution");
    }
    res.omega0 = w;
    res.residual = Real(1) / characteristic_derivative(model, beta, w);
    res.strength = std::norm(res.residual);
    res.strength_above_one = res.strength > Real(1);
    return res;
}

template <class Real>
Real fractional_strength(const EmitterSpec& emitter, const SpectralModel<Real>& model)
{
    return find_pole(emitter, model).strength;
}

template <class Real>
C<Real> contour_residual(const SpectralModel<Real>& model, Real beta, C<Real> omega0, Real radius, int nodes)
{
    // Trapezoidal rule on a circle converges geometrically for analytic integrands.
    C<Real> acc(0);
    for (int j = 0; j < nodes; ++j) {
        const Real th = Real(2) * pi_r<Real> * (Real(j) + Real(0.5)) / Real(nodes);
        const C<Real> z = radius * C<Real>(std::cos(th), std::sin(th));
        acc += spectrum(model, beta, omega0 + z) * z;
    }
    return acc / Real(nodes);
}

namespace {

// Filon weights for int_0^h (A + (B - A) u / h) e^{-i t u} du = h [A (p0 - p1) + B p1].
void filon_phi(double theta, std::complex<double>& p0, std::complex<double>& p1)
{
    const std::complex<double> z(0.0, -theta);
    if (std::abs(theta) < 0.05) {
        // p0 = sum z^n / (n+1)!, p1 = sum z^n / (n! (n+2))
        std::complex<double> term(1.0), s0(0.0), s1(0.0);
        double fact = 1.0;
        for (int n = 0; n < 12; ++n) {
            if (n > 0) {
                term *= z;
                fact *= n;
            }
            s0 += term / (fact * (n + 1));
            s1 += term / (fact * (n + 2));
        }
        p0 = s0;
        p1 = s1;
        return;
    }
    const std::complex<double> e = std::exp(z);
    p0 = (1.0 - e) / (std::complex<double>(0.0, 1.0) * theta);
    p1 = std::complex<double>(0.0, 1.0) * e / theta - (1.0 - e) / (theta * theta);
}

} // namespace

template <class Real>
DecayCurve decay_curve(const EmitterSpec& emitter, const SpectralModel<Real>& model, const DecayOptions& options)
{
    if (options.n_times < 1) throw ConfigError("decay.n_times must be >= 1");
    if (!(options.t_max > 0.0)) throw ConfigError("decay.t_max must be positive");
    const auto pole = find_pole(emitter, model);
    const Real beta = Real(emitter.beta);
    const C<Real> a = pole.residual, w0 = pole.omega0;
    const C<Real> ws(1, -Real(options.aux_width));
    const C<Real> bcoef = C<Real>(0, 1) - a;

    // Frequency grid in nu = w - 1, clustered geometrically at the features.
    std::vector<Real> feats{Real(options.omega_lo - 1.0), Real(options.omega_hi - 1.0), Real(0)};
    std::vector<Real> singular;   // segment ends, where G has log or root singularities
    for (Real x : model.breakpoints()) singular.push_back(x - Real(1));
    feats.insert(feats.end(), singular.begin(), singular.end());
    if (model.has_edge()) {
        feats.push_back(model.omega_be() - Real(1));
        if (model.delta() > Real(0)) {
            feats.push_back(model.omega_be() - Real(1) - model.delta());
            feats.push_back(model.omega_be() - Real(1) + model.delta());
        }
    }
    // A real pole is left unclustered: R is smooth there, and nodes within a
    // few ulp would amplify the rounding of w0 in the subtracted 1/(w - w0).
    const Real pole_nu = w0.real() - Real(1);
    if (!pole.bound) feats.push_back(pole_nu);
    std::sort(feats.begin(), feats.end());
    feats.erase(std::unique(feats.begin(), feats.end()), feats.end());
    const Real lo = Real(options.omega_lo - 1.0), hi = Real(options.omega_hi - 1.0);
    feats.erase(std::remove_if(feats.begin(), feats.end(), [&](Real x) { return x < lo || x > hi; }), feats.end());

    const Real h_min = Real(1e-15) > Real(16) * std::numeric_limits<Real>::epsilon()
                           ? Real(1e-15)
                           : Real(16) * std::numeric_limits<Real>::epsilon();
    const Real ratio = std::pow(Real(10), Real(1) / Real(options.points_per_decade));
    std::vector<Real> nu;
    for (std::size_t i = 0; i < feats.size(); ++i) {
        // G is singular at segment ends; they are stepped around.
        const bool skip = std::find(singular.begin(), singular.end(), feats[i]) != singular.end();
        if (!skip) nu.push_back(feats[i]);
        if (i + 1 == feats.size()) break;
        const Real half = (feats[i + 1] - feats[i]) / 2;
        for (Real h = h_min; h < half; h *= ratio) {
            nu.push_back(feats[i] + h);
            nu.push_back(feats[i + 1] - h);
        }
        nu.push_back(feats[i] + half);
    }
    std::sort(nu.begin(), nu.end());
    nu.erase(std::unique(nu.begin(), nu.end()), nu.end());

    std::vector<std::complex<double>> rest(nu.size());
    for (std::size_t j = 0; j < nu.size(); ++j) {
        const C<Real> w(Real(1) + nu[j], Real(0));
        const C<Real> r = spectrum(model, beta, w) - a / (w - w0) - bcoef / (w - ws);
        rest[j] = {static_cast<double>(r.real()), static_cast<double>(r.imag())};
    }

    DecayCurve out;
    out.omega0 = {static_cast<double>(w0.real()), static_cast<double>(w0.imag())};
    out.strength = static_cast<double>(pole.strength);
    const std::complex<double> ad(static_cast<double>(a.real()), static_cast<double>(a.imag()));
    const std::complex<double> bd(static_cast<double>(bcoef.real()), static_cast<double>(bcoef.imag()));
    const std::complex<double> iu(0.0, 1.0);
    const double nu0 = static_cast<double>(w0.real() - Real(1));
    const double gamma0 = static_cast<double>(w0.imag());

    for (int n = 0; n < options.n_times; ++n) {
        const double t = options.n_times == 1 ? 0.0 : options.t_max * n / (options.n_times - 1);
        // the common factor e^{-i t} is dropped
        std::complex<double> c = -iu * ad * std::exp(std::complex<double>(gamma0 * t, -nu0 * t)) -
                                 iu * bd * std::exp(std::complex<double>(-options.aux_width * t, 0.0));
        std::complex<double> integral(0.0);
        for (std::size_t j = 0; j + 1 < nu.size(); ++j) {
            const double x0 = static_cast<double>(nu[j]);
            const double h = static_cast<double>(nu[j + 1] - nu[j]);
            std::complex<double> p0, p1;
            filon_phi(h * t, p0, p1);
            const std::complex<double> e = std::polar(1.0, -x0 * t);
            integral += h * e * (rest[j] * (p0 - p1) + rest[j + 1] * p1);
        }
        c += integral / two_pi;
        out.times.push_back(t);
        out.population.push_back(std::norm(c));
        out.pole_part.push_back(std::norm(ad) * std::exp(2.0 * gamma0 * t));
    }
    out.population0 = out.population.front();
    if (out.times.front() == 0.0 && std::abs(out.population0 - 1.0) > options.population_tol) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "time inversion: |c(0)|^2 = %.6f deviates from 1; frequency grid too coarse",
                      out.population0);
        throw NumericalError(buf);
    }
    return out;
}

namespace {

// Detuning above which the lossless edge binds a state: Im D(b^-) changes
// sign there. Returns false if it does not happen inside [lo, hi].
template <class Real>
bool binding_threshold(const EmitterSpec& emitter, bool background, double lo, double hi, double tol, double& out)
{
    const Real beta = Real(emitter.beta);
    const Real eps = std::numeric_limits<Real>::epsilon();
    auto binds = [&](double d) {
        const auto m = SpectralModel<Real>::band_edge(Real(d), Real(emitter.k_be), Real(0), background);
        const Real x = Real(d) * (Real(1) - Real(4) * eps);
        return characteristic(m, beta, C<Real>(x, Real(0))).imag() < Real(0);
    };
    if (binds(lo) || !binds(hi)) return false;
    while (hi - lo > 0.01 * tol) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        (binds(mid) ? hi : lo) = mid;
    }
    out = hi;
    return true;
}

} // namespace

template <class Real>
DetuningResult optimize_detuning(const EmitterSpec& emitter, Real delta, bool background,
                                 const DetuningOptions& options)
{
    if (!(options.hi > options.lo)) throw ConfigError("detuning search interval is empty");
    if (!(options.tol > 0.0)) throw ConfigError("detuning tolerance must be positive");
    DetuningResult res;
    auto strength = [&](double d) {
        EmitterSpec e = emitter;
        e.detuning = d;
        ++res.evaluations;
        return static_cast<double>(fractional_strength(e, model_for<Real>(e, delta, background)));
    };

    // D_f is flat away from the binding threshold and dips sharply next to
    // it, so a plain golden section over the whole interval can stall on the
    // plateau. Sample geometrically around the threshold, then refine the
    // best bracket by golden section.
    double lo = options.lo, hi = options.hi;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int widen = 0;; ++widen) {
        std::vector<double> xs{lo, hi};
        double centre = 0.0;
        const double span = hi - lo;
        if (binding_threshold<Real>(emitter, background, lo, hi, options.tol, centre)) {
            xs.push_back(centre);
            for (double h = options.tol; h < span; h *= std::pow(10.0, 0.125)) {
                if (centre - h > lo) xs.push_back(centre - h);
                if (centre + h < hi) xs.push_back(centre + h);
            }
        }
        for (int k = 1; k < 64; ++k) xs.push_back(lo + span * k / 64.0);
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        std::vector<double> fs(xs.size());
        for (std::size_t k = 0; k < xs.size(); ++k) fs[k] = strength(xs[k]);
        const std::size_t best = std::min_element(fs.begin(), fs.end()) - fs.begin();

        double a = xs[best == 0 ? 0 : best - 1], b = xs[best + 1 == xs.size() ? best : best + 1];
        double x = xs[best], fx = fs[best];
        double c = b - gr * (b - a), d = a + gr * (b - a);
        double fc = strength(c), fd = strength(d);
        while (b - a > options.tol) {
            if (fc <= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = strength(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = strength(d);
            }
        }
        if (fc < fx) x = c, fx = fc;
        if (fd < fx) x = d, fx = fd;
        res.d_f = fx;
        res.detuning = x;
        res.lo = lo;
        res.hi = hi;
        const bool at_lo = x - lo < 2.0 * options.tol, at_hi = hi - x < 2.0 * options.tol;
        if (!(at_lo || at_hi) || widen >= options.max_widen) {
            if (at_lo || at_hi) res.warnings.push_back("minimum still on the search boundary after widening");
            break;
        }
        char buf[160];
        std::snprintf(buf, sizeof buf, "minimum on the %s boundary %.12f; widening the search interval",
                      at_lo ? "lower" : "upper", x);
        res.warnings.push_back(buf);
        res.widened = true;
        if (at_lo) lo = std::max(lo - span, window_lo + 1e-6);
        if (at_hi) hi = std::min(hi + span, window_hi - 1e-6);
    }
    return res;
}

#define FRACDECAY_INSTANTIATE(R)                                                                              \
    template class SpectralModel<R>;                                                                          \
    template complex_t<R> g_function(const SpectralModel<R>&, complex_t<R>);                                  \
    template complex_t<R> g_derivative(const SpectralModel<R>&, complex_t<R>);                                \
    template complex_t<R> g_quadrature(const SpectralModel<R>&, complex_t<R>, double);                        \
    template complex_t<R> analytic_continuation(const SpectralModel<R>&, complex_t<R>);                       \
    template complex_t<R> analytic_continuation_derivative(const SpectralModel<R>&, complex_t<R>);            \
    template complex_t<R> g_sheet(const SpectralModel<R>&, complex_t<R>);                                     \
    template complex_t<R> g_sheet_derivative(const SpectralModel<R>&, complex_t<R>);                          \
    template complex_t<R> spectrum(const SpectralModel<R>&, R, complex_t<R>);                                 \
    template SpectralModel<R> model_for(const EmitterSpec&, R, bool);                                         \
    template PoleResult<R> find_pole(const EmitterSpec&, const SpectralModel<R>&);                            \
    template R fractional_strength(const EmitterSpec&, const SpectralModel<R>&);                              \
    template complex_t<R> contour_residual(const SpectralModel<R>&, R, complex_t<R>, R, int);                 \
    template DecayCurve decay_curve(const EmitterSpec&, const SpectralModel<R>&, const DecayOptions&);        \
    template DetuningResult optimize_detuning<R>(const EmitterSpec&, R, bool, const DetuningOptions&);

FRACDECAY_INSTANTIATE(double)
FRACDECAY_INSTANTIATE(long double)

#undef FRACDECAY_INSTANTIATE

} // namespace fracdecay::dynamics
