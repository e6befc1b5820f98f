#include <fracdecay/config.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace fracdecay::config {

std::string Entry::where() const
{
    if (line > 0) return origin + ":" + std::to_string(line);
    return origin;
}

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_key(const std::string& k)
{
    const auto dot = k.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == k.size()) return false;
    return std::all_of(k.begin(), k.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    });
}

[[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& msg)
{
    throw ConfigError(e.where() + ": " + key + ": " + msg);
}

std::vector<std::string> words(const std::string& v)
{
    std::istringstream is(v);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

double to_double(const Entry& e, const std::string& key, const std::string& text)
{
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE || !std::isfinite(x))
        fail(e, key, "expected a number, got '" + text + "'");
    return x;
}

long to_long(const Entry& e, const std::string& key, const std::string& text)
{
    errno = 0;
    char* end = nullptr;
    const long x = std::strtol(text.c_str(), &end, 10);
    if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE)
        fail(e, key, "expected an integer, got '" + text + "'");
    return x;
}

bool to_bool(const Entry& e, const std::string& key)
{
    const std::string& v = e.value;
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    fail(e, key, "expected true or false, got '" + v + "'");
}

// shortest text that parses back to the same double
std::string fmt(double x)
{
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string join(const std::vector<std::string>& ws)
{
    std::string s;
    for (const auto& w : ws) s += (s.empty() ? "" : " ") + w;
    return s;
}

std::string join(const std::vector<double>& xs)
{
    std::string s;
    for (double x : xs) s += (s.empty() ? "" : " ") + fmt(x);
    return s;
}

struct Field
{
    const char* key;
    std::function<void(RunConfig&, const Entry&, const std::string&)> read;
    std::function<std::string(const RunConfig&)> write;
};

// Field builders. `lo`/`hi` are inclusive bounds unless noted.
Field real(const char* key, double RunConfig::*m, double lo, double hi, bool open_lo = false)
{
    return {key,
            [=](RunConfig& c, const Entry& e, const std::string& k) {
                const double x = to_double(e, k, e.value);
                if (x < lo || x > hi || (open_lo && x == lo)) {
                    char buf[96];
                    std::snprintf(buf, sizeof buf, "value %s outside %c%g, %g]", e.value.c_str(),
                                  open_lo ? '(' : '[', lo, hi);
                    fail(e, k, buf);
                }
                c.*m = x;
            },
            [=](const RunConfig& c) { return fmt(c.*m); }};
}

Field integer(const char* key, int RunConfig::*m, long lo, long hi)
{
    return {key,
            [=](RunConfig& c, const Entry& e, const std::string& k) {
                const long x = to_long(e, k, e.value);
                if (x < lo || x > hi)
                    fail(e, k, "value " + e.value + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
                c.*m = static_cast<int>(x);
            },
            [=](const RunConfig& c) { return std::to_string(c.*m); }};
}

Field boolean(const char* key, bool RunConfig::*m)
{
    return {key, [=](RunConfig& c, const Entry& e, const std::string& k) { c.*m = to_bool(e, k); },
            [=](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

Field word_list(const char* key, std::vector<std::string> RunConfig::*m, std::size_t min_count)
{
    return {key,
            [=](RunConfig& c, const Entry& e, const std::string& k) {
                auto ws = words(e.value);
                if (ws.size() < min_count) fail(e, k, "needs at least " + std::to_string(min_count) + " entries");
                c.*m = std::move(ws);
            },
            [=](const RunConfig& c) { return join(c.*m); }};
}

Field real_list(const char* key, std::vector<double> RunConfig::*m, double lo, double hi, bool allow_empty)
{
    return {key,
            [=](RunConfig& c, const Entry& e, const std::string& k) {
                std::vector<double> xs;
                for (const auto& w : words(e.value)) {
                    const double x = to_double(e, k, w);
                    if (x < lo || x > hi) fail(e, k, "entry " + w + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
                    xs.push_back(x);
                }
                if (xs.empty() && !allow_empty) fail(e, k, "needs at least one value");
                c.*m = std::move(xs);
            },
            [=](const RunConfig& c) { return join(c.*m); }};
}

Field text(const char* key, std::string RunConfig::*m)
{
    return {key,
            [=](RunConfig& c, const Entry& e, const std::string& k) {
                if (e.value.empty()) fail(e, k, "must not be empty");
                c.*m = e.value;
            },
            [=](const RunConfig& c) { return c.*m; }};
}

template <class Enum>
Field choice(const char* key, Enum RunConfig::*m, std::vector<std::pair<std::string, Enum>> options)
{
    return {key,
            [=](RunConfig& c, const Entry& e, const std::string& k) {
                for (const auto& [name, v] : options)
                    if (e.value == name) {
                        c.*m = v;
                        return;
                    }
                std::string all;
                for (const auto& o : options) all += (all.empty() ? "" : ", ") + o.first;
                fail(e, k, "expected one of " + all + ", got '" + e.value + "'");
            },
            [=](const RunConfig& c) {
                for (const auto& [name, v] : options)
                    if (c.*m == v) return name;
                return std::string();
            }};
}

const std::vector<Field>& fields()
{
    using R = RunConfig;
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"run.figure",
                     [](R& c, const Entry& e, const std::string&) { c.figure = e.value; },
                     [](const R& c) { return c.figure.empty() ? std::string("none") : c.figure; }});
        f.push_back({"lattice.a",
                     [](R& c, const Entry& e, const std::string& k) {
                         const double x = to_double(e, k, e.value);
                         if (!(x > 0)) fail(e, k, "must be positive");
                         c.lattice.a = x;
                     },
                     [](const R& c) { return fmt(c.lattice.a); }});
        f.push_back({"lattice.r_over_a",
                     [](R& c, const Entry& e, const std::string& k) {
                         const double x = to_double(e, k, e.value);
                         if (x < 0.0 || x >= crystal::max_r_over_a)
                             fail(e, k, "value " + e.value + " outside the supported overlap range [0, " +
                                            fmt(crystal::max_r_over_a) + ")");
                         c.lattice.r_over_a = x;
                     },
                     [](const R& c) { return fmt(c.lattice.r_over_a); }});
        f.push_back({"lattice.eps_real",
                     [](R& c, const Entry& e, const std::string& k) {
                         const double x = to_double(e, k, e.value);
                         if (!(x >= 1.0)) fail(e, k, "must be >= 1");
                         c.lattice.eps_backbone_real = x;
                     },
                     [](const R& c) { return fmt(c.lattice.eps_backbone_real); }});
        f.push_back({"lattice.eps_imag",
                     [](R& c, const Entry& e, const std::string& k) {
                         const double x = to_double(e, k, e.value);
                         if (!(x >= 0.0)) fail(e, k, "must be >= 0");
                         c.lattice.eps_backbone_imag = x;
                     },
                     [](const R& c) { return fmt(c.lattice.eps_backbone_imag); }});
        f.push_back({"lattice.eps_sphere",
                     [](R& c, const Entry& e, const std::string& k) {
                         const double x = to_double(e, k, e.value);
                         if (!(x >= 1.0)) fail(e, k, "must be >= 1");
                         c.lattice.eps_sphere = x;
                     },
                     [](const R& c) { return fmt(c.lattice.eps_sphere); }});
        f.push_back(integer("basis.count", &R::basis_count, 1, 20000));
        f.push_back(integer("basis.edge_count", &R::edge_basis_count, 1, 20000));
        f.push_back(integer("kmesh.resolution", &R::kmesh_resolution, 1, 400));
        f.push_back(boolean("kmesh.half_zone", &R::kmesh_half_zone));

        f.push_back(word_list("bands.path", &R::band_path, 2));
        f.push_back(integer("bands.points_per_segment", &R::band_points_per_segment, 1, 100000));
        f.push_back(integer("bands.count", &R::band_count, 1, 1000));
        f.push_back(boolean("bands.on_mesh", &R::band_on_mesh));

        f.push_back(text("ldos.position", &R::ldos_position));
        f.push_back(word_list("ldos.orientations", &R::ldos_orientations, 1));
        f.push_back(real("ldos.omega_min", &R::ldos_omega_min, 0.0, 100.0));
        f.push_back(real("ldos.omega_max", &R::ldos_omega_max, 0.0, 100.0, true));
        f.push_back(real("ldos.bin_width", &R::ldos_bin_width, 0.0, 10.0, true));
        f.push_back(integer("ldos.first_band", &R::ldos_first_band, 1, 1000));
        f.push_back(integer("ldos.last_band", &R::ldos_last_band, 1, 1000));
        f.push_back(real("ldos.fit_window", &R::ldos_fit_window, 0.0, 1.0, true));
        f.push_back(boolean("ldos.vacuum_units", &R::ldos_vacuum_units));
        f.push_back(integer("ldos.analytic_points", &R::ldos_analytic_points, 2, 1000000));

        f.push_back(integer("band_edge.band", &R::edge_band, 1, 1000));
        f.push_back(real("band_edge.spacing", &R::edge_spacing, 0.0, 0.1, true));
        f.push_back(real("band_edge.degeneracy_tol", &R::edge_degeneracy_tol, 0.0, 1e-2));

        f.push_back(real_list("loss.delta", &R::loss_delta, 0.0, 1e-2, false));
        f.push_back(word_list("loss.alpha_label", &R::loss_alpha_label, 0));
        f.push_back(real("loss.f", &R::loss_f, 0.0, 1.0, true));

        f.push_back(choice<ModelKind>("emitter.model", &R::model,
                                      {{"band_edge", ModelKind::band_edge}, {"vacuum", ModelKind::vacuum}}));
        f.push_back(real("emitter.beta", &R::beta, 0.0, 1e-2, true));
        f.push_back(real("emitter.omega_eg", &R::omega_eg, 0.0, 1e30, true));
        f.push_back(real("emitter.detuning", &R::detuning, 0.95, 1.01, true));
        f.push_back(real("emitter.k_be", &R::k_be, 0.0, 1e6));
        f.push_back(choice<KbeSource>("emitter.k_be_source", &R::k_be_source,
                                      {{"direct", KbeSource::direct}, {"fit", KbeSource::fit}}));
        f.push_back(text("emitter.k_be_orientation", &R::k_be_orientation));

        f.push_back(boolean("dynamics.background", &R::background));
        f.push_back(real("dynamics.cutoff", &R::cutoff, 1.01, 1e12, true));
        f.push_back(real("dynamics.t_max", &R::t_max, 0.0, 1e20, true));
        f.push_back(integer("dynamics.n_times", &R::n_times, 1, 10000000));
        f.push_back(real("dynamics.omega_lo", &R::omega_lo, 0.0, 0.95));
        f.push_back(real("dynamics.omega_hi", &R::omega_hi, 1.01, 10.0));
        f.push_back(integer("dynamics.points_per_decade", &R::points_per_decade, 1, 10000));
        f.push_back(real("dynamics.aux_width", &R::aux_width, 0.0, 1.0, true));
        f.push_back(choice<Precision>("dynamics.precision", &R::precision,
                                      {{"double", Precision::real64}, {"long_double", Precision::extended}}));

        f.push_back(real("df.beta_k_min", &R::df_beta_k_min, 0.0, 1.0, true));
        f.push_back(real("df.beta_k_max", &R::df_beta_k_max, 0.0, 1.0, true));
        f.push_back(integer("df.points", &R::df_points, 1, 100000));
        f.push_back(real("df.detuning_lo", &R::df_detuning_lo, 0.95, 1.01, true));
        f.push_back(real("df.detuning_hi", &R::df_detuning_hi, 0.95, 1.01, true));
        f.push_back(real("df.tol", &R::df_tol, 0.0, 1e-3, true));

        f.push_back(word_list("kbe.path", &R::kbe_path, 1));
        f.push_back(integer("kbe.points_per_segment", &R::kbe_points_per_segment, 1, 100000));
        f.push_back(word_list("kbe.orientations", &R::kbe_orientations, 1));
        f.push_back(real_list("kbe.sweep", &R::kbe_sweep, 0.0, crystal::max_r_over_a, true));
        f.push_back(integer("kbe.sweep_basis", &R::kbe_sweep_basis, 1, 20000));

        f.push_back({"run.threads",
                     [](R& c, const Entry& e, const std::string& k) {
                         const long x = to_long(e, k, e.value);
                         if (x < 0 || x > 4096) fail(e, k, "value " + e.value + " outside [0, 4096]");
                         c.threads = static_cast<unsigned>(x);
                     },
                     [](const R& c) { return std::to_string(c.threads); }});
        f.push_back(text("output.dir", &R::out_dir));
        f.push_back({"output.prefix", [](R& c, const Entry& e, const std::string&) { c.out_prefix = e.value; },
                     [](const R& c) { return c.out_prefix; }});
        return f;
    }();
    return table;
}

void check_position(const RunConfig& c, const std::string& text, const Entry* e, const std::string& key)
{
    try {
        parse_position(c, text);
    } catch (const ConfigError& err) {
        if (e) fail(*e, key, err.what());
        throw;
    }
}

void check_orientation(const std::string& text, const Entry* e, const std::string& key)
{
    try {
        parse_orientation(text);
    } catch (const ConfigError& err) {
        if (e) fail(*e, key, err.what());
        throw;
    }
}

} // namespace

KeyValues KeyValues::parse(std::istream& in, const std::string& origin)
{
    KeyValues kv;
    std::string raw;
    for (int line = 1; std::getline(in, raw); ++line) {
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        const Entry here{"", origin, line};
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(here.where() + ": expected 'section.key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!valid_key(key)) throw ConfigError(here.where() + ": malformed key '" + key + "' (expected section.key)");
        if (const Entry* prev = kv.find(key))
            throw ConfigError(here.where() + ": " + key + ": repeated (first set at line " + std::to_string(prev->line) + ")");
        kv.set(key, value, origin, line);
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open configuration file");
    return parse(in, path);
}

void KeyValues::set(const std::string& key, const std::string& value, const std::string& origin, int line)
{
    m_entries[key] = Entry{value, origin, line};
}

void KeyValues::merge(const KeyValues& over)
{
    for (const auto& [k, e] : over.m_entries) m_entries[k] = e;
}

const Entry* KeyValues::find(const std::string& key) const
{
    const auto it = m_entries.find(key);
    return it == m_entries.end() ? nullptr : &it->second;
}

const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{"fig1", "fig2", "fig3", "fig4", "empty-lattice", "vacuum"};
    return names;
}

KeyValues preset(const std::string& name)
{
    // Values from the figure captions and the example paragraph; see the
    // README for the detuning used in fig3.
    static const std::map<std::string, std::string> text{
        {"fig1", R"(run.figure = fig1
lattice.r_over_a = 0.35355339059327373
lattice.eps_real = 11.76
basis.count = 169
basis.edge_count = 531
kmesh.resolution = 47
kmesh.half_zone = true
ldos.position = H
ldos.orientations = z x y
ldos.omega_min = 0.79
ldos.omega_max = 0.85
ldos.bin_width = 5e-4
ldos.first_band = 8
ldos.last_band = 10
ldos.fit_window = 0.004
loss.delta = 1e-3 5e-3
)"},
        {"fig2", R"(run.figure = fig2
lattice.r_over_a = 0.3436
lattice.eps_real = 11.76
basis.edge_count = 531
kbe.path = Gamma H P Gamma N H
kbe.points_per_segment = 20
kbe.orientations = z x y
kbe.sweep = 0.34 0.3436 0.347 0.35 0.35355339059327373 0.36 0.37
kbe.sweep_basis = 169
)"},
        {"fig3", R"(run.figure = fig3
emitter.beta = 5.5e-8
emitter.omega_eg = 1.3e15
emitter.detuning = 0.9999991691
emitter.k_be = 10
emitter.k_be_source = direct
loss.delta = 0 1e-10 1e-9
loss.alpha_label = 0 3e-4 3e-5
dynamics.t_max = 2e10
dynamics.n_times = 400
)"},
        {"fig4", R"(run.figure = fig4
emitter.k_be = 10
emitter.k_be_source = direct
loss.delta = 0 1e-10 1e-9
loss.alpha_label = 0 3e-4 3e-5
df.beta_k_min = 1e-8
df.beta_k_max = 1e-5
df.points = 10
)"},
        {"empty-lattice", R"(run.figure = empty-lattice
lattice.r_over_a = 0
lattice.eps_real = 1
basis.count = 169
bands.count = 12
)"},
        {"vacuum", R"(run.figure = vacuum
emitter.model = vacuum
emitter.beta = 5.5e-8
loss.delta = 0
dynamics.t_max = 2.9e7
dynamics.n_times = 200
)"},
    };
    const auto it = text.find(name);
    if (it == text.end()) {
        std::string all;
        for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (expected one of " + all + ")");
    }
    std::istringstream in(it->second);
    return KeyValues::parse(in, "preset " + name);
}

RunConfig resolve(const KeyValues& kv)
{
    RunConfig c;
    std::map<std::string, const Field*> by_key;
    for (const auto& f : fields()) by_key[f.key] = &f;

    for (const auto& [key, e] : kv.entries()) {
        if (key.rfind("positions.", 0) == 0) {
            const std::string label = crystal::canonical_label(key.substr(10));
            const auto ws = words(e.value);
            if (ws.size() != 3) fail(e, key, "expected three coordinates in units of a");
            c.position_overrides[label] = vec3(to_double(e, key, ws[0]), to_double(e, key, ws[1]), to_double(e, key, ws[2]));
            continue;
        }
        const auto it = by_key.find(key);
        if (it == by_key.end()) fail(e, key, "unknown key");
        it->second->read(c, e, key);
    }
    for (const auto& [label, r] : c.position_overrides) c.positions.set(label, r);

    // Cross-key checks name the later of the keys involved.
    auto at = [&](const char* key) { return kv.find(key); };
    auto cross = [&](bool ok, const char* key, const std::string& msg) {
        if (ok) return;
        if (const Entry* e = at(key)) fail(*e, key, msg);
        throw ConfigError(std::string(key) + ": " + msg);
    };
    cross(c.ldos_omega_max > c.ldos_omega_min, "ldos.omega_max", "must exceed ldos.omega_min");
    cross(c.ldos_last_band >= c.ldos_first_band, "ldos.last_band", "must be >= ldos.first_band");
    cross(c.df_beta_k_max >= c.df_beta_k_min, "df.beta_k_max", "must be >= df.beta_k_min");
    cross(c.df_detuning_hi > c.df_detuning_lo, "df.detuning_hi", "must exceed df.detuning_lo");
    cross(c.loss_alpha_label.empty() || c.loss_alpha_label.size() == c.loss_delta.size(), "loss.alpha_label",
          "needs one label per loss.delta entry");
    cross(c.edge_basis_count >= 15, "basis.edge_count", "too small to resolve the ninth band");

    check_position(c, c.ldos_position, at("ldos.position"), "ldos.position");
    for (const auto& o : c.ldos_orientations) check_orientation(o, at("ldos.orientations"), "ldos.orientations");
    for (const auto& o : c.kbe_orientations) check_orientation(o, at("kbe.orientations"), "kbe.orientations");
    check_orientation(c.k_be_orientation, at("emitter.k_be_orientation"), "emitter.k_be_orientation");
    for (const auto& p : c.kbe_path) check_position(c, p, at("kbe.path"), "kbe.path");
    for (const auto& p : c.band_path) {
        try {
            crystal::bz_point(p);
        } catch (const ConfigError& err) {
            if (const Entry* e = at("bands.path")) fail(*e, "bands.path", err.what());
            throw;
        }
    }
    return c;
}

void write_resolved(std::ostream& os, const RunConfig& cfg, const std::string& prefix)
{
    for (const auto& f : fields()) os << prefix << f.key << " = " << f.write(cfg) << '\n';
    for (const auto& [label, r] : cfg.position_overrides)
        os << prefix << "positions." << label << " = " << fmt(r[0]) << ' ' << fmt(r[1]) << ' ' << fmt(r[2]) << '\n';
}

vec3 parse_position(const RunConfig& cfg, const std::string& text)
{
    const auto ws = words(text);
    if (ws.size() == 1) return cfg.positions(ws[0]).position;
    if (ws.size() == 3) {
        vec3 r;
        for (int i = 0; i < 3; ++i) {
            char* end = nullptr;
            r[i] = std::strtod(ws[i].c_str(), &end);
            if (end != ws[i].c_str() + ws[i].size()) throw ConfigError("bad coordinate '" + ws[i] + "'");
        }
        return r;
    }
    throw ConfigError("position '" + text + "' is neither a label nor three coordinates");
}

vec3 parse_orientation(const std::string& text)
{
    if (text == "x") return vec3::UnitX();
    if (text == "y") return vec3::UnitY();
    if (text == "z") return vec3::UnitZ();
    if (text == "trace") return vec3::Zero();
    const auto ws = words(text);
    if (ws.size() == 3) {
        vec3 e;
        for (int i = 0; i < 3; ++i) {
            char* end = nullptr;
            e[i] = std::strtod(ws[i].c_str(), &end);
            if (end != ws[i].c_str() + ws[i].size()) throw ConfigError("bad orientation component '" + ws[i] + "'");
        }
        if (e.norm() == 0.0) return e;
        return e.normalized();
    }
    throw ConfigError("orientation '" + text + "' is not x, y, z, trace or three components");
}

} // namespace fracdecay::config
