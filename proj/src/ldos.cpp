#include <fracdecay/ldos.hpp>
#include <fracdecay/parallel.hpp>
#include <fracdecay/quadrature.hpp>

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fracdecay::ldos {

double vacuum_ldos(double omega_n)
{
    const double w = two_pi * omega_n;
    return w * w / (3.0 * pi * pi);
}

double LdosHistogram::integral() const
{
    return values.sum() * bin_width();
}

namespace {

void check_options(const HistogramOptions& o)
{
    if (!(o.bin_width > 0.0)) throw ConfigError("ldos.bin_width must be positive");
    if (!(o.omega_max > o.omega_min)) throw ConfigError("ldos frequency range is empty");
}

std::vector<LdosHistogram> empty_histograms(const vec3& r, const mat3x& orientations, const HistogramOptions& o)
{
    check_options(o);
    const int bins = static_cast<int>(std::ceil((o.omega_max - o.omega_min) / o.bin_width - 1e-9));
    std::vector<LdosHistogram> hs(orientations.cols());
    for (Eigen::Index c = 0; c < orientations.cols(); ++c) {
        auto& h = hs[c];
        h.bin_edges.resize(bins + 1);
        for (int i = 0; i <= bins; ++i) h.bin_edges[i] = o.omega_min + i * o.bin_width;
        h.values = vecx::Zero(bins);
        h.r = r;
        const vec3 e = orientations.col(c);
        h.orientation = e.norm() > 0 ? vec3(e.normalized()) : vec3::Zero();
    }
    return hs;
}

// One mode's contribution: frequency and |e.E(r)|^2 per orientation.
struct Deposit
{
    double omega;
    double weight;
    std::vector<double> amp;
};

std::vector<Deposit> mode_deposits(const vec3& r, const mat3x& orientations, const pwe::BandSolution& s,
                                   double weight, const HistogramOptions& o)
{
    std::vector<Deposit> out;
    for (Eigen::Index n = 0; n < s.omegas.size(); ++n) {
        const double w = s.omegas[n];
        if (w < o.omega_min || w >= o.omega_max) continue;
        if (!s.has_field(static_cast<int>(n))) {
            if (w < 1e-8) continue;   // zero-frequency modes at Gamma carry no field
            throw NumericalError("histogram range needs a field that was not computed");
        }
        const cvec3 e = pwe::ModeField(s, static_cast<int>(n))(r);
        Deposit d{w, weight, {}};
        d.amp.reserve(orientations.cols());
        for (Eigen::Index c = 0; c < orientations.cols(); ++c) {
            const vec3 p = orientations.col(c);
            if (p.norm() == 0.0) {
                d.amp.push_back(e.squaredNorm());
            } else {
                d.amp.push_back(std::norm(p.normalized().cast<cplx>().dot(e)));
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

void deposit(std::vector<LdosHistogram>& hs, const std::vector<Deposit>& ds, const HistogramOptions& o)
{
    const double scale = crystal::cell_volume / (two_pi * o.bin_width);
    for (const auto& d : ds) {
        const int bin = static_cast<int>(std::floor((d.omega - o.omega_min) / o.bin_width));
        if (bin < 0 || bin >= hs.front().bins()) continue;
        for (std::size_t c = 0; c < hs.size(); ++c) hs[c].values[bin] += scale * d.weight * d.amp[c];
    }
}

} // namespace

std::vector<LdosHistogram> ldos_histograms(const vec3& r, const mat3x& orientations,
                                           const std::vector<pwe::BandSolution>& modes, const vecx& weights,
                                           const HistogramOptions& options)
{
    if (modes.empty()) throw ConfigError("ldos histogram needs a non-empty k mesh");
    auto hs = empty_histograms(r, orientations, options);
    for (std::size_t i = 0; i < modes.size(); ++i)
        deposit(hs, mode_deposits(r, orientations, modes[i], weights[static_cast<Eigen::Index>(i)], options), options);
    return hs;
}

LdosHistogram ldos_histogram(const vec3& r, const vec3& orientation, const std::vector<pwe::BandSolution>& modes,
                             const vecx& weights, const HistogramOptions& options)
{
    mat3x e(3, 1);
    e.col(0) = orientation;
    return ldos_histograms(r, e, modes, weights, options).front();
}

std::vector<LdosHistogram> mesh_ldos(const pwe::DielectricMatrix& dielectric, const crystal::KMesh& mesh,
                                     const vec3& r, const mat3x& orientations, const MeshLdosOptions& options)
{
    if (mesh.size() == 0) throw ConfigError("ldos histogram needs a non-empty k mesh");
    auto hs = empty_histograms(r, orientations, options.histogram);
    const pwe::SolveOptions so{options.n_bands, options.first_band, options.n_bands - options.first_band};
    const auto parts = parallel_map<std::vector<Deposit>>(
        static_cast<std::size_t>(mesh.size()), options.threads, [&](std::size_t i) {
            const auto s =
                pwe::eigensolve(pwe::assemble(dielectric, mesh.points.col(static_cast<Eigen::Index>(i))), so);
            return mode_deposits(r, orientations, s, mesh.weights[static_cast<Eigen::Index>(i)], options.histogram);
        });
    for (const auto& p : parts) deposit(hs, p, options.histogram);
    return hs;
}

void scale_to_vacuum(LdosHistogram& h, double reference_omega_n)
{
    h.values /= vacuum_ldos(reference_omega_n);
    h.reference_omega = reference_omega_n;
}

BandEdgeFit fit_band_edge(const pwe::DielectricMatrix& dielectric, const BandEdgeOptions& options)
{
    if (!(options.spacing > 0.0)) throw ConfigError("band_edge.spacing must be positive");
    if (options.spacing > 0.1) throw ConfigError("band_edge.spacing is too coarse for a parabolic fit (> 0.1)");

    const auto xs = crystal::x_points();
    const int n_bands = options.band + 3;
    const double h = options.spacing;
    const int offsets[4] = {-2, -1, 1, 2};

    mat3x pts(3, static_cast<Eigen::Index>(xs.size() * 13));
    int c = 0;
    for (const auto& x : xs) {
        pts.col(c++) = x;
        for (int axis = 0; axis < 3; ++axis)
            for (int s : offsets) pts.col(c++) = x + s * h * vec3::Unit(axis);
    }

    // Fields at the pocket bottoms for the band and its neighbours, so that a
    // degenerate partner can be included.
    const int first = std::max(options.band - 2, 0);
    const pwe::SolveOptions with_fields{n_bands, first, n_bands - first};
    const pwe::SolveOptions values_only{n_bands, 0, 0};
    const auto sols = parallel_map<pwe::BandSolution>(
        static_cast<std::size_t>(pts.cols()), options.threads, [&](std::size_t i) {
            const bool bottom = i % 13 == 0;
            return pwe::eigensolve(pwe::assemble(dielectric, pts.col(static_cast<Eigen::Index>(i))),
                                   bottom ? with_fields : values_only);
        });

    BandEdgeFit fit;
    fit.band = options.band;
    fit.spacing = h;
    for (std::size_t p = 0; p < xs.size(); ++p) {
        const auto& s0 = sols[p * 13];
        const double f0 = s0.omegas[options.band];
        Pocket pocket;
        pocket.k_point = xs[p];
        pocket.q = s0.q;
        for (int axis = 0; axis < 3; ++axis) {
            double f[4];
            for (int j = 0; j < 4; ++j) f[j] = sols[p * 13 + 1 + axis * 4 + j].omegas[options.band];
            pocket.curvature(axis, axis) = (-f[0] + 16.0 * f[1] - 30.0 * f0 + 16.0 * f[2] - f[3]) / (12.0 * h * h);
        }
        if (!(pocket.curvature.diagonal().array() > 0.0).all())
            throw NumericalError("band-edge curvature is not positive definite at X; the band is not a minimum there");
        for (int b = first; b < n_bands; ++b)
            if (std::abs(s0.omegas[b] - f0) <= options.degeneracy_tol * f0) pocket.fields.push_back(s0.field(b));
        fit.omega_be = p == 0 ? f0 : std::min(fit.omega_be, f0);
        fit.pockets.push_back(std::move(pocket));
    }
    return fit;
}

double pocket_weight(const Pocket& pocket, const vec3& r, const vec3& orientation)
{
    double w = 0.0;
    for (const auto& coeffs : pocket.fields) {
        cvec3 e = cvec3::Zero();
        for (Eigen::Index i = 0; i < pocket.q.cols(); ++i)
            e += coeffs.col(i).cast<cplx>() * std::polar(1.0, two_pi * pocket.q.col(i).dot(r));
        if (orientation.norm() == 0.0) {
            w += e.squaredNorm();
        } else {
            w += std::norm(orientation.normalized().cast<cplx>().dot(e));
        }
    }
    return w;
}

namespace {

// Density of states of a parabolic pocket: int d^3k delta(w - w0 - dk.A.dk/2)
// = 4 pi sqrt2 sqrt(w - w0) / sqrt(det A). Converting normalized k and
// omega to a = c = 1 angular units leaves (2 pi)^(-3/2).
double pocket_prefactor(double det_a)
{
    return crystal::cell_volume * 4.0 * pi * std::sqrt(2.0) / (std::pow(two_pi, 1.5) * std::sqrt(det_a));
}

} // namespace

double isotropic_pocket_k(double alpha, double weight)
{
    return pocket_prefactor(alpha * alpha * alpha) * weight;
}

double k_be_physical(const BandEdgeFit& fit, const vec3& r, const vec3& orientation)
{
    double k = 0.0;
    for (const auto& p : fit.pockets) k += pocket_prefactor(p.curvature.determinant()) * pocket_weight(p, r, orientation);
    return k;
}

double k_be_scaled(const BandEdgeFit& fit, const vec3& r, const vec3& orientation)
{
    const double w = two_pi * fit.omega_be;
    return k_be_physical(fit, r, orientation) * std::sqrt(w) / vacuum_ldos(fit.omega_be);
}

LossModel loss_delta(const crystal::LatticeSpec& spec, double f, double omega0)
{
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("loss field fraction f must lie in (0, 1]");
    LossModel m;
    m.f = f;
    m.eps_ratio = spec.eps_backbone_imag / spec.eps_backbone_real;
    m.delta = omega0 * m.eps_ratio * f / 2.0;
    return m;
}

double broadened_ldos(const BandEdgeModel& model, const LossModel& loss, double omega)
{
    if (loss.delta < 0.0) throw ConfigError("loss width must be non-negative");
    const double x = omega - model.omega_be;
    if (loss.delta == 0.0) return x > 0.0 ? model.k_be * std::sqrt(x) : 0.0;
    return model.k_be * std::sqrt(cplx(x, loss.delta)).real();
}

double broadened_ldos_quadrature(const BandEdgeModel& model, const LossModel& loss, double omega, double rel_tol)
{
    const double d = loss.delta;
    if (d < 0.0) throw ConfigError("loss width must be non-negative");
    const double x = omega - model.omega_be;
    if (d == 0.0) return x > 0.0 ? model.k_be * std::sqrt(x) : 0.0;

    auto lorentz = [&](double u) { return (d / pi) / ((x - u) * (x - u) + d * d); };
    const double big_u = 50.0 * std::max(std::abs(x), d) + d;

    // u = s^2 on [0, U] removes the square-root endpoint
    std::vector<double> breaks{0.0};
    for (double u : {x - 3 * d, x - d, x, x + d, x + 3 * d})
        if (u > 0.0 && u < big_u) breaks.push_back(std::sqrt(u));
    breaks.push_back(std::sqrt(big_u));
    std::sort(breaks.begin(), breaks.end());
    const auto inner = quad::integrate([&](double s) { return 2.0 * s * s * lorentz(s * s); }, breaks, rel_tol, 0.0);

    // u = U / t^2 maps the tail onto (0, 1]
    const auto tail = quad::integrate(
        [&](double t) {
            if (t == 0.0) return 2.0 * d / (pi * std::sqrt(big_u));
            const double u = big_u / (t * t);
            return std::sqrt(u) * lorentz(u) * 2.0 * big_u / (t * t * t);
        },
        0.0, 1.0, rel_tol, 0.0);
    return model.k_be * (inner.value + tail.value);
}

PowerLawFit fit_power_law(const LdosHistogram& h, double omega_be, double window)
{
    PowerLawFit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0, num = 0, den = 0;
    for (int i = 0; i < h.bins(); ++i) {
        const double dx = h.center(i) - omega_be;
        if (dx <= 0.0 || dx > window || h.values[i] <= 0.0) continue;
        const double lx = std::log(dx), ly = std::log(h.values[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        num += h.values[i] * std::sqrt(dx);
        den += dx;
        ++fit.points;
    }
    if (fit.points < 3) throw NumericalError("too few populated bins above the band edge for a power-law fit");
    const double n = fit.points;
    fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.prefactor = std::exp((sy - fit.exponent * sx) / n);
    fit.sqrt_prefactor = num / den;
    return fit;
}

void write_histograms(std::ostream& os, const std::vector<LdosHistogram>& hs)
{
    if (hs.empty()) return;
    os << "# columns: omega";
    for (const auto& h : hs) {
        if (h.orientation.norm() == 0.0) {
            os << " rho_trace";
        } else {
            char buf[64];
            std::snprintf(buf, sizeof buf, " rho_e(%.3g,%.3g,%.3g)", h.orientation[0], h.orientation[1], h.orientation[2]);
            os << buf;
        }
    }
    os << '\n';
    char buf[48];
    for (int i = 0; i < hs.front().bins(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10f", hs.front().center(i));
        os << buf;
        for (const auto& h : hs) {
            std::snprintf(buf, sizeof buf, " %.10e", h.values[i]);
            os << buf;
        }
        os << '\n';
    }
}

} // namespace fracdecay::ldos
