#include <doctest.h>

#include <fracdecay/dynamics.hpp>
#include <fracdecay/quadrature.hpp>

#include <cmath>

using namespace fracdecay;
using namespace fracdecay::dynamics;

namespace {

using cd = std::complex<double>;

double rel(cd a, cd b) { return std::abs(a - b) / std::abs(b); }

EmitterSpec fig3_emitter()
{
    EmitterSpec e;
    e.beta = 5.5e-8;
    e.k_be = 10.0;
    e.detuning = 1.0 - 8.309e-7;
    return e;
}

} // namespace

TEST_CASE("vacuum G against the real-axis closed form")
{
    const double cutoff = 1e5;
    const auto m = SpectralModel<double>::vacuum(cutoff);
    for (double w : {0.1, 0.5, 1.0, 2.0, 30.0}) {
        const cd expect(pi * w, w * std::log(w / (cutoff - w)));
        CHECK(rel(g_function(m, cd(w, 0.0)), expect) < 1e-13);
        CHECK(rel(g_quadrature(m, cd(w, 0.0)), expect) < 1e-10);
    }
    CHECK(g_function(m, cd(1.0, 0.0)).real() == doctest::Approx(pi).epsilon(1e-14));
}

TEST_CASE("window closed forms agree with quadrature off and on the axis")
{
    for (double delta : {0.0, 1e-10, 1e-9, 1e-4}) {
        const auto m = SpectralModel<double>::band_edge(0.999, 10.0, delta);
        for (double x : {0.2, 0.96, 0.9989, 0.9991, 1.0, 1.005, 1.02, 3.0})
            for (double eta : {0.0, 1e-9, 1e-4, 0.3}) {
                const cd w(x, eta);
                CHECK(rel(g_function(m, w), g_quadrature(m, w)) < 1e-9);
            }
    }
}

TEST_CASE("derivative of G matches a central difference")
{
    const auto m = SpectralModel<double>::band_edge(0.999, 10.0, 1e-6);
    for (cd w : {cd(0.97, 1e-3), cd(1.0, 1e-4), cd(0.9992, -1e-5), cd(1.003, -2e-4)}) {
        const double h = 1e-7;
        const cd fd = (g_sheet(m, w + h) - g_sheet(m, w - h)) / (2.0 * h);
        CHECK(rel(g_sheet_derivative(m, w), fd) < 1e-6);
    }
}

TEST_CASE("zero density gives zero G and a gap gives purely imaginary G")
{
    const auto none = SpectralModel<double>::none();
    CHECK(std::abs(g_function(none, cd(1.0, 0.0))) == 0.0);
    // Below the edge with the background off, rho vanishes and G is purely
    // imaginary on the real axis.
    const auto m = SpectralModel<double>::band_edge(1.0, 10.0, 0.0, false);
    for (double x : {0.5, 0.9, 0.99, 0.999999}) CHECK(std::abs(g_function(m, cd(x, 0.0)).real()) < 1e-14);
    // Above it, Re G = pi rho / w.
    const double x = 1.004;
    CHECK(g_function(m, cd(x, 0.0)).real() == doctest::Approx(pi * m.density(x) / x).epsilon(1e-12));
}

TEST_CASE("the integral below the axis is the mirror image of the one above")
{
    // Direct quadrature of i w int dx / (w - x) over [0, C] at Im w < 0.
    const double cutoff = 50.0;
    const auto v = SpectralModel<double>::vacuum(cutoff);
    for (cd w : {cd(0.5, -0.2), cd(1.0, -1e-2), cd(7.0, -3.0)}) {
        const auto direct = quad::integrate([&](double x) { return 1.0 / (w - x); },
                                            std::vector<double>{0.0, w.real(), cutoff}, 1e-13, 0.0);
        const cd g_direct = cd(0, 1) * w * direct.value;
        CHECK(rel(-std::conj(g_function(v, std::conj(w))), g_direct) < 1e-11);
        // continued sheet = direct integral + 2 pi rho / w
        CHECK(rel(g_sheet(v, w), g_direct + 2.0 * pi * w) < 1e-11);
    }
}

TEST_CASE("continuation is continuous across the cut")
{
    for (double delta : {0.0, 1e-8}) {
        const auto m = SpectralModel<double>::band_edge(0.999, 10.0, delta);
        for (double x : {0.96, 0.99905, 1.0, 1.008, 1.5}) {
            const cd above = g_sheet(m, cd(x, 1e-13));
            const cd below = g_sheet(m, cd(x, -1e-13));
            CHECK(rel(below, above) < 1e-6);
        }
    }
    // Vacuum: analytic, so the continued G matches a Taylor step.
    const auto v = SpectralModel<double>::vacuum();
    const cd w0(1.0, 0.0), w1(1.0, -1e-3);
    const cd step = g_sheet(v, w0) + g_sheet_derivative(v, w0) * (w1 - w0);
    CHECK(rel(g_sheet(v, w1), step) < 1e-5);
}

TEST_CASE("vacuum pole reproduces the Wigner-Weisskopf rate")
{
    EmitterSpec e;
    e.beta = 5.5e-8;
    const auto p = find_pole(e, SpectralModel<double>::vacuum());
    CHECK_FALSE(p.bound);
    CHECK(p.omega0.imag() == doctest::Approx(-pi * e.beta).epsilon(1e-4));
    CHECK(std::abs(p.strength - 1.0) < 1e-5);
}

TEST_CASE("background-off bound state lies in the gap with strength below one")
{
    EmitterSpec e = fig3_emitter();
    e.detuning = 1.0 + 1e-6;   // transition inside the gap
    const auto m = model_for<double>(e, 0.0, false);
    const auto p = find_pole(e, m);
    CHECK(p.bound);
    CHECK(p.omega0.imag() == 0.0);
    CHECK(p.omega0.real() < e.detuning);
    CHECK(p.strength < 1.0);
    CHECK(p.strength > 0.5);
}

TEST_CASE("pole residual matches a contour integral")
{
    // Long double: the circle is ~1e-11 across, far below double resolution
    // of w near 1.
    using cl = std::complex<long double>;
    EmitterSpec e = fig3_emitter();
    for (long double delta : {0.0L, 1e-10L, 1e-9L}) {
        const auto m = model_for<long double>(e, delta);
        const auto p = find_pole(e, m);
        // half the distance to the nearest branch point
        const long double radius = 0.5L * std::abs(p.omega0 - cl((long double)e.detuning, -delta));
        const cl a = contour_residual(m, (long double)e.beta, p.omega0, radius, 128);
        CHECK(double(std::abs(a - p.residual) / std::abs(p.residual)) < 1e-8);
    }
}

TEST_CASE("weak coupling drives the strength to one")
{
    EmitterSpec e = fig3_emitter();
    double last = 1.0;
    for (double beta : {1e-8, 1e-10, 1e-12}) {
        e.beta = beta;
        const double s = fractional_strength(e, model_for<double>(e, 0.0));
        CHECK(std::abs(s - 1.0) <= last);
        last = std::abs(s - 1.0);
    }
    CHECK(last < 1e-3);
}

TEST_CASE("double and long double agree on the fractional strength")
{
    EmitterSpec e = fig3_emitter();
    for (double delta : {0.0, 1e-10, 1e-9}) {
        const double s = fractional_strength(e, model_for<double>(e, delta));
        const long double sl = fractional_strength(e, model_for<long double>(e, (long double)delta));
        // the bound state sits 1e-10 below the edge, so double resolves the
        // distance to it only to ~1e-6 relative
        CHECK(std::abs(s - double(sl)) < 1e-6);
    }
}

TEST_CASE("loss reduces the trapped fraction")
{
    EmitterSpec e = fig3_emitter();
    double last = 0.0;
    for (double delta : {0.0, 1e-11, 1e-10, 1e-9, 1e-8}) {
        const double s = fractional_strength(e, model_for<double>(e, delta));
        CHECK(s > last);
        last = s;
    }
}

TEST_CASE("decay curve starts at unit population and tends to the pole part")
{
    EmitterSpec e = fig3_emitter();
    DecayOptions o;
    o.n_times = 41;
    o.t_max = 4e9;
    for (double delta : {0.0, 1e-9}) {
        const auto c = decay_curve(e, model_for<double>(e, delta), o);
        CHECK(std::abs(c.population0 - 1.0) < 1e-4);
        for (double p : c.population) CHECK(p <= 1.0 + 1e-4);
        CHECK(std::abs(c.population.back() - c.pole_part.back()) < 0.03);
    }
    // a grid without any refinement cannot represent the edge
    o.points_per_decade = 1;
    o.omega_lo = 0.999999;
    o.omega_hi = 1.000001;
    CHECK_THROWS_AS(decay_curve(e, model_for<double>(e, 0.0), o), NumericalError);
}

TEST_CASE("detuning optimum sits at or below the edge and is bounded by the endpoints")
{
    EmitterSpec e = fig3_emitter();
    DetuningOptions o;
    for (double delta : {0.0, 1e-9}) {
        const auto r = optimize_detuning<double>(e, delta, true, o);
        CHECK(r.d_f <= 1.0 + 1e-9);
        EmitterSpec lo = e, hi = e;
        lo.detuning = o.lo;
        hi.detuning = o.hi;
        CHECK(r.d_f <= fractional_strength(lo, model_for<double>(lo, delta)));
        CHECK(r.d_f <= fractional_strength(hi, model_for<double>(hi, delta)));
        CHECK(r.d_f <= fractional_strength(e, model_for<double>(e, delta)));
        CHECK_FALSE(r.widened);
    }
}

TEST_CASE("input validation")
{
    CHECK_THROWS_AS(SpectralModel<double>::band_edge(0.9, 10.0, 0.0), ConfigError);
    CHECK_THROWS_AS(SpectralModel<double>::band_edge(1.0, 10.0, -1.0), ConfigError);
    EmitterSpec e;
    e.beta = -1.0;
    CHECK_THROWS_AS(e.validate(), ConfigError);
    const auto v = SpectralModel<double>::vacuum();
    CHECK_THROWS_AS(g_function(v, cd(1.0, -1.0)), NumericalError);
}
