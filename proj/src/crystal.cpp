#include <fracdecay/crystal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace fracdecay::crystal {

void LatticeSpec::validate() const
{
    auto fail = [](const std::string& what) { throw ConfigError(what); };
    if (!(a > 0.0)) fail("lattice constant must be positive");
    if (!(r_over_a >= 0.0)) fail("r_over_a must be non-negative");
    if (r_over_a >= max_r_over_a) {
        std::ostringstream os;
        os << "r_over_a = " << r_over_a << " outside the supported overlap range [0, "
           << max_r_over_a << "); spheres would cover the whole cell";
        fail(os.str());
    }
    if (!(eps_backbone_real >= 1.0)) fail("eps_backbone_real must be >= 1");
    if (!(eps_backbone_imag >= 0.0)) fail("eps_backbone_imag must be >= 0");
    if (!(eps_sphere >= 1.0)) fail("eps_sphere must be >= 1");
}

double LatticeSpec::sphere_fraction() const
{
    return 16.0 * pi / 3.0 * r_over_a * r_over_a * r_over_a;
}

mat3 primitive_vectors()
{
    mat3 a;
    a << 0.0, 0.5, 0.5,
         0.5, 0.0, 0.5,
         0.5, 0.5, 0.0;
    return a;
}

mat3 reciprocal_vectors()
{
    mat3 b;
    b << -1.0,  1.0,  1.0,
          1.0, -1.0,  1.0,
          1.0,  1.0, -1.0;
    return b;
}

bool is_reciprocal_vector(const vec3i& g)
{
    const int p0 = g[0] & 1, p1 = g[1] & 1, p2 = g[2] & 1;
    return p0 == p1 && p1 == p2;
}

vec3i to_primitive(const vec3i& g)
{
    return {(g[1] + g[2]) / 2, (g[0] + g[2]) / 2, (g[0] + g[1]) / 2};
}

int ReciprocalSet::max_norm2() const
{
    int m = 0;
    for (const auto& v : indices) m = std::max(m, v.squaredNorm());
    return m;
}

namespace {

std::vector<vec3i> enumerate_ball(int max_norm2)
{
    const int lim = static_cast<int>(std::ceil(std::sqrt(double(max_norm2))));
    std::vector<vec3i> out;
    for (int h = -lim; h <= lim; ++h)
        for (int k = -lim; k <= lim; ++k)
            for (int l = -lim; l <= lim; ++l) {
                const vec3i g(h, k, l);
                if (is_reciprocal_vector(g) && g.squaredNorm() <= max_norm2) out.push_back(g);
            }
    std::sort(out.begin(), out.end(), [](const vec3i& x, const vec3i& y) {
        const int nx = x.squaredNorm(), ny = y.squaredNorm();
        if (nx != ny) return nx < ny;
        return std::lexicographical_compare(x.data(), x.data() + 3, y.data(), y.data() + 3);
    });
    return out;
}

} // namespace

ReciprocalSet build_reciprocal_set(int target_count)
{
    if (target_count < 1) throw ConfigError("basis.count must be >= 1");

    // Grow the enumeration radius until the requested count fits with a
    // complete outer shell.
    int radius2 = 16;
    std::vector<vec3i> ball;
    for (;;) {
        ball = enumerate_ball(radius2);
        if (static_cast<int>(ball.size()) > target_count) {
            const int cut = ball[target_count - 1].squaredNorm();
            if (ball.back().squaredNorm() > cut) break;
        }
        radius2 *= 2;
    }
    const int cut = ball[target_count - 1].squaredNorm();
    ReciprocalSet set;
    for (const auto& g : ball) {
        if (g.squaredNorm() > cut) break;
        set.indices.push_back(g);
    }
    set.g.resize(3, set.count());
    for (int i = 0; i < set.count(); ++i) set.g.col(i) = set.indices[i].cast<double>();
    return set;
}

int next_shell_norm2(const ReciprocalSet& set)
{
    const int m = set.max_norm2();
    for (int n2 = m + 1;; ++n2) {
        const int lim = static_cast<int>(std::ceil(std::sqrt(double(n2))));
        for (int h = -lim; h <= lim; ++h)
            for (int k = -lim; k <= lim; ++k)
                for (int l = -lim; l <= lim; ++l) {
                    const vec3i g(h, k, l);
                    if (is_reciprocal_vector(g) && g.squaredNorm() == n2) return n2;
                }
    }
}

double distance_to_nearest_site(const vec3& r)
{
    // FCC sites are (a/2) times the D3 lattice (integer vectors with even sum).
    const vec3 x = 2.0 * r;
    vec3 f = x.array().round();
    const long sum = std::lround(f.sum());
    if (sum % 2 != 0) {
        int worst = 0;
        double err = -1.0;
        for (int i = 0; i < 3; ++i) {
            const double e = std::abs(x[i] - f[i]);
            if (e > err) {
                err = e;
                worst = i;
            }
        }
        f[worst] += (x[worst] > f[worst]) ? 1.0 : -1.0;
    }
    return 0.5 * (x - f).norm();
}

namespace {

// Number of spheres of radius R (units a) covering r.
int cover_count(const vec3& r, double radius)
{
    static const std::array<vec3, 13> shifts = [] {
        std::array<vec3, 13> s{};
        s[0] = vec3::Zero();
        int n = 1;
        for (int i = 0; i < 3; ++i)
            for (int sa : {-1, 1})
                for (int sb : {-1, 1}) {
                    vec3 v = vec3::Zero();
                    v[(i + 1) % 3] = 0.5 * sa;
                    v[(i + 2) % 3] = 0.5 * sb;
                    s[n++] = v;
                }
        return s;
    }();

    const vec3 x = 2.0 * r;
    vec3 f = x.array().round();
    if (std::lround(f.sum()) % 2 != 0) {
        int worst = 0;
        double err = -1.0;
        for (int i = 0; i < 3; ++i) {
            const double e = std::abs(x[i] - f[i]);
            if (e > err) {
                err = e;
                worst = i;
            }
        }
        f[worst] += (x[worst] > f[worst]) ? 1.0 : -1.0;
    }
    const vec3 site = 0.5 * f;
    int count = 0;
    for (const auto& s : shifts)
        if ((r - site - s).norm() < radius) ++count;
    return count;
}

double form_factor(double u)
{
    if (u < 1e-3) {
        const double u2 = u * u;
        return 1.0 - u2 / 10.0 + u2 * u2 / 280.0;
    }
    return 3.0 * (std::sin(u) - u * std::cos(u)) / (u * u * u);
}

} // namespace

DielectricFourier::DielectricFourier(const LatticeSpec& spec, int max_primitive_index, int grid,
                                     int supersample)
    : m_spec(spec)
{
    spec.validate();
    m_quadrature = spec.overlapping();
    if (!m_quadrature) return;

    // Overlapping spheres: the single-sphere form factor double counts the
    // lens-shaped overlaps. Sample that excess on a grid and subtract it.
    const int M = std::max(max_primitive_index, 1);
    m_max_index = M;
    const int n = grid;
    const int ss = supersample;
    const double radius = spec.r_over_a;
    const mat3 A = primitive_vectors();

    std::vector<double> excess(static_cast<size_t>(n) * n * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int a = 0; a < ss; ++a)
                    for (int b = 0; b < ss; ++b)
                        for (int c = 0; c < ss; ++c) {
                            const vec3 s((i + (a + 0.5) / ss) / n, (j + (b + 0.5) / ss) / n,
                                         (k + (c + 0.5) / ss) / n);
                            const int cnt = cover_count(A * s, radius);
                            if (cnt > 1) acc += cnt - 1;
                        }
                excess[(static_cast<size_t>(i) * n + j) * n + k] = acc / (ss * ss * ss);
            }

    const int w = 2 * M + 1;
    std::vector<cplx> phase(static_cast<size_t>(w) * n);
    for (int m = -M; m <= M; ++m)
        for (int i = 0; i < n; ++i)
            phase[static_cast<size_t>(m + M) * n + i] = std::polar(1.0, -two_pi * m * (i + 0.5) / n);

    // Separable transform along k, then j, then i.
    std::vector<cplx> t1(static_cast<size_t>(n) * n * w);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int m3 = 0; m3 < w; ++m3) {
                cplx acc = 0.0;
                for (int k = 0; k < n; ++k)
                    acc += excess[(static_cast<size_t>(i) * n + j) * n + k] * phase[static_cast<size_t>(m3) * n + k];
                t1[(static_cast<size_t>(i) * n + j) * w + m3] = acc;
            }
    std::vector<cplx> t2(static_cast<size_t>(n) * w * w);
    for (int i = 0; i < n; ++i)
        for (int m2 = 0; m2 < w; ++m2)
            for (int m3 = 0; m3 < w; ++m3) {
                cplx acc = 0.0;
                for (int j = 0; j < n; ++j)
                    acc += t1[(static_cast<size_t>(i) * n + j) * w + m3] * phase[static_cast<size_t>(m2) * n + j];
                t2[(static_cast<size_t>(i) * w + m2) * w + m3] = acc;
            }
    m_table.assign(static_cast<size_t>(w) * w * w, 0.0);
    const double norm = 1.0 / (double(n) * n * n);
    for (int m1 = 0; m1 < w; ++m1)
        for (int m2 = 0; m2 < w; ++m2)
            for (int m3 = 0; m3 < w; ++m3) {
                cplx acc = 0.0;
                for (int i = 0; i < n; ++i)
                    acc += t2[(static_cast<size_t>(i) * w + m2) * w + m3] * phase[static_cast<size_t>(m1) * n + i];
                m_table[(static_cast<size_t>(m1) * w + m2) * w + m3] = acc * norm;
            }
}

double DielectricFourier::sphere_indicator(const vec3i& g) const
{
    const double u = two_pi * g.cast<double>().norm() * m_spec.r_over_a;
    double value = m_spec.sphere_fraction() * form_factor(u);
    if (m_quadrature) {
        const vec3i m = to_primitive(g);
        if (m.cwiseAbs().maxCoeff() > m_max_index)
            throw NumericalError("overlap quadrature table too small for requested G");
        const int w = 2 * m_max_index + 1;
        const size_t idx = (static_cast<size_t>(m[0] + m_max_index) * w + (m[1] + m_max_index)) * w +
                           (m[2] + m_max_index);
        // The structure is inversion symmetric, so the exact coefficient is real.
        value -= m_table[idx].real();
    }
    return value;
}

double DielectricFourier::backbone_indicator(const vec3i& g) const
{
    const double s = sphere_indicator(g);
    return (g.isZero() ? 1.0 : 0.0) - s;
}

cplx DielectricFourier::operator()(const vec3i& g) const
{
    const cplx eb = m_spec.eps_backbone();
    const cplx es(m_spec.eps_sphere, 0.0);
    return (g.isZero() ? eb : cplx(0.0)) + (es - eb) * sphere_indicator(g);
}

cplx epsilon_fourier(const LatticeSpec& spec, const vec3i& g)
{
    const int m = to_primitive(g).cwiseAbs().maxCoeff();
    return DielectricFourier(spec, m)(g);
}

KMesh build_kmesh(int resolution, bool half_zone)
{
    if (resolution < 1) throw ConfigError("kmesh.resolution must be >= 1");
    const int n = resolution;
    const mat3 B = reciprocal_vectors();
    const double w = bz_volume / (double(n) * n * n);

    KMesh mesh;
    mesh.resolution = n;
    mesh.half_zone = half_zone;
    std::vector<vec3> pts;
    std::vector<double> wts;
    auto coord = [n](int i) { return (2.0 * i - n - 1.0) / (2.0 * n); };
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j)
            for (int k = 1; k <= n; ++k) {
                double weight = w;
                if (half_zone) {
                    // MP grids are inversion symmetric: -u_i = u_{n+1-i}.
                    const std::array<int, 3> me{i, j, k};
                    const std::array<int, 3> partner{n + 1 - i, n + 1 - j, n + 1 - k};
                    if (partner < me) continue;
                    if (partner != me) weight *= 2.0;
                }
                pts.push_back(fold_to_bz(B * vec3(coord(i), coord(j), coord(k))));
                wts.push_back(weight);
            }
    mesh.points.resize(3, static_cast<Eigen::Index>(pts.size()));
    mesh.weights.resize(static_cast<Eigen::Index>(wts.size()));
    for (size_t i = 0; i < pts.size(); ++i) {
        mesh.points.col(static_cast<Eigen::Index>(i)) = pts[i];
        mesh.weights[static_cast<Eigen::Index>(i)] = wts[i];
    }
    return mesh;
}

vec3 fold_to_bz(const vec3& k)
{
    // The reciprocal lattice is BCC: all-even or all-odd integer triples.
    vec3 even, odd;
    for (int i = 0; i < 3; ++i) {
        even[i] = 2.0 * std::round(k[i] / 2.0);
        odd[i] = 2.0 * std::round((k[i] - 1.0) / 2.0) + 1.0;
    }
    const double de = (k - even).squaredNorm();
    const double dodd = (k - odd).squaredNorm();
    return de <= dodd ? vec3(k - even) : vec3(k - odd);
}

bool in_first_bz(const vec3& k, double tol)
{
    const double k2 = k.squaredNorm();
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1})
                if (k2 > (k - vec3(sx, sy, sz)).squaredNorm() + tol) return false;
    for (int i = 0; i < 3; ++i)
        for (int s : {-2, 2}) {
            vec3 g = vec3::Zero();
            g[i] = s;
            if (k2 > (k - g).squaredNorm() + tol) return false;
        }
    return true;
}

std::string canonical_label(std::string_view label)
{
    if (label == "Gamma" || label == "G" || label == "Γ" || label == "gamma") return "Gamma";
    return std::string(label);
}

vec3 bz_point(std::string_view label)
{
    const std::string l = canonical_label(label);
    if (l == "Gamma") return vec3(0, 0, 0);
    if (l == "X") return vec3(1, 0, 0);
    if (l == "W") return vec3(1, 0.5, 0);
    if (l == "L") return vec3(0.5, 0.5, 0.5);
    if (l == "K") return vec3(0.75, 0.75, 0);
    if (l == "U") return vec3(1, 0.25, 0.25);
    throw ConfigError("unknown Brillouin-zone label '" + l + "'");
}

std::vector<vec3> x_points()
{
    return {vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 0, 1)};
}

WignerSeitzTable::WignerSeitzTable()
{
    m_points["Gamma"] = vec3(0, 0, 0);
    m_points["H"] = vec3(0.5, 0, 0);
    m_points["P"] = vec3(0.25, 0.25, 0.25);
    m_points["N"] = vec3(0.25, 0.25, 0);
}

void WignerSeitzTable::set(std::string_view label, const vec3& position)
{
    m_points[canonical_label(label)] = position;
}

bool WignerSeitzTable::contains(std::string_view label) const
{
    return m_points.find(canonical_label(label)) != m_points.end();
}

WignerSeitzPoint WignerSeitzTable::operator()(std::string_view label) const
{
    const std::string l = canonical_label(label);
    const auto it = m_points.find(l);
    if (it == m_points.end()) throw ConfigError("unknown Wigner-Seitz label '" + l + "'");
    return {l, it->second};
}

WignerSeitzPoint ws_point(std::string_view label)
{
    static const WignerSeitzTable table;
    return table(label);
}

} // namespace fracdecay::crystal
