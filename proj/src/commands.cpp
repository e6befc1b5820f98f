#include <fracdecay/commands.hpp>

#include <fracdecay/crystal.hpp>
#include <fracdecay/dynamics.hpp>
#include <fracdecay/ldos.hpp>
#include <fracdecay/output.hpp>
#include <fracdecay/parallel.hpp>
#include <fracdecay/pwe.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fracdecay::commands {

using config::RunConfig;
using output::num;

namespace {

std::string fmt_row(const char* f, double x)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

mat3x orientation_matrix(const std::vector<std::string>& names)
{
    mat3x e(3, static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < names.size(); ++i) e.col(static_cast<Eigen::Index>(i)) = config::parse_orientation(names[i]);
    return e;
}

// Straight segments between labelled points, endpoints shared.
mat3x sample_path(const std::vector<vec3>& nodes, int per_segment, std::vector<double>* arc = nullptr)
{
    const int n = static_cast<int>(nodes.size());
    const int count = (n - 1) * per_segment + 1;
    mat3x pts(3, count);
    double s = 0.0;
    int col = 0;
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j < per_segment; ++j) {
            const vec3 p = nodes[i] + (nodes[i + 1] - nodes[i]) * (double(j) / per_segment);
            if (col > 0) s += (p - pts.col(col - 1)).norm();
            pts.col(col++) = p;
            if (arc) arc->push_back(s);
        }
    pts.col(col) = nodes.back();
    if (arc) arc->push_back(s + (nodes.back() - pts.col(col - 1)).norm());
    return pts;
}

bool is_empty_lattice(const crystal::LatticeSpec& s)
{
    const bool uniform_backbone = s.eps_backbone_real == 1.0 && s.eps_backbone_imag == 0.0;
    return uniform_backbone && (s.r_over_a == 0.0 || s.eps_sphere == 1.0);
}

ldos::BandEdgeFit edge_fit(const RunConfig& cfg, const crystal::LatticeSpec& lattice, int basis_count)
{
    const auto basis = crystal::build_reciprocal_set(basis_count);
    const pwe::DielectricMatrix eps(lattice, basis);
    ldos::BandEdgeOptions o;
    o.band = cfg.edge_band - 1;
    o.spacing = cfg.edge_spacing;
    o.degeneracy_tol = cfg.edge_degeneracy_tol;
    o.threads = cfg.threads;
    return ldos::fit_band_edge(eps, o);
}

dynamics::EmitterSpec emitter_for(const RunConfig& cfg, double k_be)
{
    dynamics::EmitterSpec e;
    e.beta = cfg.beta;
    e.omega_eg = cfg.omega_eg;
    e.detuning = cfg.detuning;
    e.k_be = k_be;
    e.validate();
    return e;
}

std::string loss_tag(const RunConfig& cfg, std::size_t i)
{
    return cfg.loss_delta.size() == 1 ? std::string() : "_" + std::to_string(i);
}

} // namespace

Report bands(const RunConfig& cfg)
{
    cfg.lattice.validate();
    const auto basis = crystal::build_reciprocal_set(cfg.basis_count);
    const pwe::DielectricMatrix eps(cfg.lattice, basis);

    mat3x points;
    std::string where;
    if (cfg.band_on_mesh) {
        points = crystal::build_kmesh(cfg.kmesh_resolution, cfg.kmesh_half_zone).points;
        where = "mesh";
    } else {
        std::vector<vec3> nodes;
        for (const auto& l : cfg.band_path) {
            nodes.push_back(crystal::bz_point(l));
            where += (where.empty() ? "" : "-") + l;
        }
        points = sample_path(nodes, cfg.band_points_per_segment);
    }

    pwe::SolveOptions so;
    so.n_bands = cfg.band_count;
    const auto sol = pwe::solve_points(eps, points, so, cfg.threads);

    output::Header h{"bands", {}, ""};
    h.results.push_back({"basis_size", std::to_string(basis.count())});
    h.results.push_back({"k_points", std::to_string(points.cols())});
    h.results.push_back({"k_source", where});
    h.results.push_back({"eps_rcond", num(eps.rcond())});
    Report r;
    if (is_empty_lattice(cfg.lattice)) {
        // free photons: omega = |k + G|, two polarizations each
        double worst = 0.0;
        for (const auto& s : sol) {
            std::vector<double> free;
            for (int g = 0; g < basis.count(); ++g) {
                const double w = (s.k + basis.g.col(g)).norm();
                free.push_back(w);
                free.push_back(w);
            }
            std::sort(free.begin(), free.end());
            for (Eigen::Index n = 0; n < s.omegas.size(); ++n) {
                const double d = std::abs(s.omegas[n] - free[n]);
                worst = std::max(worst, free[n] > 1e-12 ? d / free[n] : d);
            }
        }
        h.results.push_back({"empty_lattice_max_rel_error", num(worst)});
        r.summary.push_back("empty lattice: max relative deviation from |k+G| = " + num(worst));
    }

    const auto path = output::path_for(cfg, "bands.txt");
    auto os = output::open(path);
    output::write_header(os, h, cfg);
    pwe::write_band_table(os, sol);
    r.files.push_back(path);
    r.summary.push_back(std::to_string(points.cols()) + " k-points, " + std::to_string(cfg.band_count) + " bands");
    return r;
}

Report ldos(const RunConfig& cfg)
{
    cfg.lattice.validate();
    const vec3 pos = config::parse_position(cfg, cfg.ldos_position);
    const mat3x orient = orientation_matrix(cfg.ldos_orientations);

    const auto basis = crystal::build_reciprocal_set(cfg.basis_count);
    const pwe::DielectricMatrix eps(cfg.lattice, basis);
    const auto mesh = crystal::build_kmesh(cfg.kmesh_resolution, cfg.kmesh_half_zone);

    ldos::MeshLdosOptions mo;
    mo.histogram = {cfg.ldos_omega_min, cfg.ldos_omega_max, cfg.ldos_bin_width};
    mo.n_bands = cfg.ldos_last_band;
    mo.first_band = cfg.ldos_first_band - 1;
    mo.threads = cfg.threads;
    auto hs = ldos::mesh_ldos(eps, mesh, pos, orient, mo);

    // Edge of the histogram's own basis locates the fit window; the
    // analytic curves use the (usually larger) edge basis.
    const auto hist_edge = edge_fit(cfg, cfg.lattice, cfg.basis_count);
    const auto fit = cfg.edge_basis_count == cfg.basis_count ? hist_edge
                                                            : edge_fit(cfg, cfg.lattice, cfg.edge_basis_count);

    output::Header hh{"ldos", {}, ""};
    hh.results.push_back({"k_points", std::to_string(mesh.size())});
    hh.results.push_back({"basis_size", std::to_string(basis.count())});
    hh.results.push_back({"position", num(pos[0]) + " " + num(pos[1]) + " " + num(pos[2])});
    hh.results.push_back({"omega_be_histogram_basis", num(hist_edge.omega_be)});
    hh.results.push_back({"omega_be_edge_basis", num(fit.omega_be)});
    Report r;
    for (std::size_t c = 0; c < hs.size(); ++c) {
        const std::string name = cfg.ldos_orientations[c];
        try {
            const auto pl = ldos::fit_power_law(hs[c], hist_edge.omega_be, cfg.ldos_fit_window);
            hh.results.push_back({"sqrt_fit_exponent_" + name, num(pl.exponent)});
            hh.results.push_back({"sqrt_fit_points_" + name, std::to_string(pl.points)});
            r.summary.push_back("orientation " + name + ": fitted exponent " + fmt_row("%.4f", pl.exponent) + " over " +
                                std::to_string(pl.points) + " bins");
        } catch (const NumericalError& e) {
            hh.results.push_back({"sqrt_fit_" + name, std::string("unavailable: ") + e.what()});
        }
    }
    if (cfg.ldos_vacuum_units)
        for (auto& h : hs) ldos::scale_to_vacuum(h, hist_edge.omega_be);
    hh.results.push_back({"units", cfg.ldos_vacuum_units ? "rho0(omega_be_histogram_basis)" : "per angular frequency"});

    const auto hist_path = output::path_for(cfg, "ldos_histogram.txt");
    {
        auto os = output::open(hist_path);
        output::write_header(os, hh, cfg);
        ldos::write_histograms(os, hs);
    }
    r.files.push_back(hist_path);

    // Analytic band-edge law with and without broadening, scaled frequency
    // w = omega / omega_BE, in units of rho0(omega_BE).
    output::Header ha{"ldos", {}, ""};
    ha.results.push_back({"omega_be", num(fit.omega_be)});
    std::vector<double> ks;
    std::vector<double> losses{0.0};
    for (double d : cfg.loss_delta)
        if (d > 0.0) losses.push_back(d);
    std::string cols = "omega";
    for (std::size_t c = 0; c < cfg.ldos_orientations.size(); ++c) {
        ks.push_back(ldos::k_be_scaled(fit, pos, orient.col(static_cast<Eigen::Index>(c))));
        ha.results.push_back({"k_be_" + cfg.ldos_orientations[c], num(ks.back())});
        r.summary.push_back("K_BE(" + cfg.ldos_orientations[c] + ") = " + fmt_row("%.4f", ks.back()));
        for (double d : losses) cols += " rho_" + cfg.ldos_orientations[c] + "_delta" + num(d);
    }
    ha.columns = cols;
    const auto an_path = output::path_for(cfg, "ldos_analytic.txt");
    {
        auto os = output::open(an_path);
        output::write_header(os, ha, cfg);
        const int n = cfg.ldos_analytic_points;
        for (int i = 0; i < n; ++i) {
            const double w_n = cfg.ldos_omega_min + (cfg.ldos_omega_max - cfg.ldos_omega_min) * i / (n - 1);
            os << fmt_row("%.10f", w_n);
            for (double k : ks)
                for (double d : losses) {
                    ldos::LossModel loss;
                    loss.delta = d;
                    os << fmt_row(" %.10e", ldos::broadened_ldos({1.0, k}, loss, w_n / fit.omega_be));
                }
            os << '\n';
        }
    }
    r.files.push_back(an_path);
    return r;
}

Report kbe_map(const RunConfig& cfg)
{
    cfg.lattice.validate();
    const mat3x orient = orientation_matrix(cfg.kbe_orientations);
    const auto fit = edge_fit(cfg, cfg.lattice, cfg.edge_basis_count);

    std::vector<vec3> nodes;
    for (const auto& l : cfg.kbe_path) nodes.push_back(config::parse_position(cfg, l));
    std::vector<double> arc;
    const mat3x pts = nodes.size() > 1 ? sample_path(nodes, cfg.kbe_points_per_segment, &arc) : mat3x(nodes[0]);
    if (arc.empty()) arc.push_back(0.0);

    output::Header h{"kbe-map", {}, ""};
    h.results.push_back({"omega_be", num(fit.omega_be)});
    h.results.push_back({"pockets", std::to_string(fit.pockets.size())});
    std::string cols = "s x y z";
    for (const auto& o : cfg.kbe_orientations) cols += " K_" + o;
    h.columns = cols + " K_mean K_trace_over_3";

    Report r;
    const auto h_pos = cfg.positions("H").position;
    for (Eigen::Index c = 0; c < orient.cols(); ++c) {
        const double k = ldos::k_be_scaled(fit, h_pos, orient.col(c));
        h.results.push_back({"k_be_H_" + cfg.kbe_orientations[c], num(k)});
        r.summary.push_back("K_BE at H, " + cfg.kbe_orientations[c] + ": " + fmt_row("%.4f", k));
    }

    const auto path = output::path_for(cfg, "kbe_map.txt");
    {
        auto os = output::open(path);
        output::write_header(os, h, cfg);
        for (Eigen::Index i = 0; i < pts.cols(); ++i) {
            const vec3 p = pts.col(i);
            os << fmt_row("%.8f", arc[i]) << fmt_row(" %.8f", p[0]) << fmt_row(" %.8f", p[1])
               << fmt_row(" %.8f", p[2]);
            double sum = 0.0;
            for (Eigen::Index c = 0; c < orient.cols(); ++c) {
                const double k = ldos::k_be_scaled(fit, p, orient.col(c));
                sum += k;
                os << fmt_row(" %.8e", k);
            }
            os << fmt_row(" %.8e", sum / double(orient.cols()))
               << fmt_row(" %.8e", ldos::k_be_scaled(fit, p, vec3::Zero()) / 3.0) << '\n';
        }
    }
    r.files.push_back(path);

    if (!cfg.kbe_sweep.empty()) {
        output::Header hs{"kbe-map", {}, ""};
        std::string scols = "r_over_a omega_be";
        for (const auto& o : cfg.kbe_orientations) scols += " K_H_" + o;
        hs.columns = scols;
        // A radius whose ninth band has no minimum at X is reported, not fatal.
        std::ostringstream rows;
        for (double ra : cfg.kbe_sweep) {
            auto lat = cfg.lattice;
            lat.r_over_a = ra;
            lat.validate();
            rows << fmt_row("%.8f", ra);
            try {
                const auto f = edge_fit(cfg, lat, cfg.kbe_sweep_basis);
                rows << fmt_row(" %.10f", f.omega_be);
                for (Eigen::Index c = 0; c < orient.cols(); ++c)
                    rows << fmt_row(" %.8e", ldos::k_be_scaled(f, h_pos, orient.col(c)));
            } catch (const NumericalError& e) {
                hs.results.push_back({"skipped r_over_a " + num(ra), e.what()});
                r.summary.push_back("sweep R/a = " + fmt_row("%g", ra) + " skipped: " + e.what());
                for (Eigen::Index c = 0; c <= orient.cols(); ++c) rows << " nan";
            }
            rows << '\n';
        }
        const auto spath = output::path_for(cfg, "kbe_sweep.txt");
        auto os = output::open(spath);
        output::write_header(os, hs, cfg);
        os << rows.str();
        r.files.push_back(spath);
    }
    return r;
}

EdgeParameters edge_parameters(const RunConfig& cfg)
{
    EdgeParameters p;
    p.k_be = cfg.k_be;
    if (cfg.k_be_source == config::KbeSource::fit) {
        cfg.lattice.validate();
        const auto fit = edge_fit(cfg, cfg.lattice, cfg.edge_basis_count);
        p.k_be = ldos::k_be_scaled(fit, config::parse_position(cfg, cfg.ldos_position),
                                   config::parse_orientation(cfg.k_be_orientation));
        p.omega_be_normalized = fit.omega_be;
    }
    return p;
}

namespace {

template <class Real>
dynamics::DecayCurve decay_for(const RunConfig& cfg, const dynamics::EmitterSpec& e, double delta,
                               const dynamics::DecayOptions& o, bool& bound)
{
    const auto m = cfg.model == config::ModelKind::vacuum
                       ? dynamics::SpectralModel<Real>::vacuum(Real(cfg.cutoff))
                       : dynamics::SpectralModel<Real>::band_edge(Real(e.detuning), Real(e.k_be), Real(delta),
                                                                  cfg.background, Real(cfg.cutoff));
    bound = dynamics::find_pole(e, m).bound;
    return dynamics::decay_curve(e, m, o);
}

} // namespace

Report decay(const RunConfig& cfg)
{
    const auto edge = edge_parameters(cfg);
    const auto e = emitter_for(cfg, edge.k_be);
    dynamics::DecayOptions o;
    o.t_max = cfg.t_max;
    o.n_times = cfg.n_times;
    o.omega_lo = cfg.omega_lo;
    o.omega_hi = cfg.omega_hi;
    o.aux_width = cfg.aux_width;
    o.points_per_decade = cfg.points_per_decade;

    struct Out
    {
        dynamics::DecayCurve curve;
        bool bound = false;
    };
    const auto runs = parallel_map<Out>(cfg.loss_delta.size(), cfg.threads, [&](std::size_t i) {
        Out out;
        if (cfg.precision == config::Precision::extended)
            out.curve = decay_for<long double>(cfg, e, cfg.loss_delta[i], o, out.bound);
        else
            out.curve = decay_for<double>(cfg, e, cfg.loss_delta[i], o, out.bound);
        return out;
    });

    Report r;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& c = runs[i].curve;
        output::Header h{"decay", {}, "t population pole_part"};
        h.results.push_back({"delta", num(cfg.loss_delta[i])});
        if (i < cfg.loss_alpha_label.size()) h.results.push_back({"alpha_label", cfg.loss_alpha_label[i]});
        h.results.push_back({"k_be_used", num(edge.k_be)});
        h.results.push_back({"beta_k_be", num(e.beta * e.k_be)});
        h.results.push_back({"strength", num(c.strength)});
        h.results.push_back({"omega0", num(c.omega0.real()) + " " + num(c.omega0.imag())});
        h.results.push_back({"bound", runs[i].bound ? "true" : "false"});
        h.results.push_back({"population0", num(c.population0)});
        h.results.push_back({"time_unit", "1/omega_eg = " + num(1.0 / cfg.omega_eg) + " s"});
        const auto path = output::path_for(cfg, "decay" + loss_tag(cfg, i) + ".txt");
        auto os = output::open(path);
        output::write_header(os, h, cfg);
        for (std::size_t j = 0; j < c.times.size(); ++j)
            os << fmt_row("%.10e", c.times[j]) << fmt_row(" %.15e", c.population[j])
               << fmt_row(" %.15e", c.pole_part[j]) << '\n';
        r.files.push_back(path);
        r.summary.push_back("delta = " + fmt_row("%g", cfg.loss_delta[i]) + ": |a_-1|^2 = " + fmt_row("%.6f", c.strength) +
                            (runs[i].bound ? " (bound state)" : ""));
    }
    return r;
}

Report df_scan(const RunConfig& cfg)
{
    const auto edge = edge_parameters(cfg);
    const int n = cfg.df_points;
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i)
        grid[i] = n == 1 ? cfg.df_beta_k_min
                         : cfg.df_beta_k_min * std::pow(cfg.df_beta_k_max / cfg.df_beta_k_min, double(i) / (n - 1));

    dynamics::DetuningOptions o;
    o.lo = cfg.df_detuning_lo;
    o.hi = cfg.df_detuning_hi;
    o.tol = cfg.df_tol;
    const std::size_t nl = cfg.loss_delta.size();
    const auto res = parallel_map<dynamics::DetuningResult>(nl * n, cfg.threads, [&](std::size_t idx) {
        const std::size_t l = idx / n, i = idx % n;
        dynamics::EmitterSpec e = emitter_for(cfg, edge.k_be);
        e.beta = grid[i] / edge.k_be;
        if (cfg.precision == config::Precision::extended)
            return dynamics::optimize_detuning<long double>(e, (long double)cfg.loss_delta[l], cfg.background, o);
        return dynamics::optimize_detuning<double>(e, cfg.loss_delta[l], cfg.background, o);
    });

    Report r;
    for (std::size_t l = 0; l < nl; ++l) {
        output::Header h{"df-scan", {}, "beta_k_be d_f argmin_detuning"};
        h.results.push_back({"delta", num(cfg.loss_delta[l])});
        if (l < cfg.loss_alpha_label.size()) h.results.push_back({"alpha_label", cfg.loss_alpha_label[l]});
        h.results.push_back({"k_be_used", num(edge.k_be)});
        int widened = 0;
        for (int i = 0; i < n; ++i) {
            const auto& d = res[l * n + i];
            if (d.widened) ++widened;
            for (const auto& w : d.warnings) h.results.push_back({"warning", "beta_k_be " + num(grid[i]) + ": " + w});
        }
        h.results.push_back({"widened_points", std::to_string(widened)});
        const auto path = output::path_for(cfg, "df" + loss_tag(cfg, l) + ".txt");
        auto os = output::open(path);
        output::write_header(os, h, cfg);
        for (int i = 0; i < n; ++i) {
            const auto& d = res[l * n + i];
            os << fmt_row("%.10e", grid[i]) << fmt_row(" %.15e", d.d_f) << fmt_row(" %.17g", d.detuning) << '\n';
        }
        r.files.push_back(path);
        r.summary.push_back("delta = " + fmt_row("%g", cfg.loss_delta[l]) + ": D_f from " + fmt_row("%.4f", res[l * n].d_f) +
                            " to " + fmt_row("%.4f", res[l * n + n - 1].d_f));
    }
    return r;
}

} // namespace fracdecay::commands
