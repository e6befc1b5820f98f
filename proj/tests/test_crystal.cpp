#include <doctest.h>

#include <fracdecay/crystal.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <map>
#include <random>
#include <set>

using namespace fracdecay;
using namespace fracdecay::crystal;

namespace {

// Independent enumeration: integer triples with all entries of equal parity.
std::vector<int> brute_norms(int box)
{
    std::vector<int> out;
    for (int h = -box; h <= box; ++h)
        for (int k = -box; k <= box; ++k)
            for (int l = -box; l <= box; ++l)
                if (((h - k) % 2 == 0) && ((k - l) % 2 == 0)) out.push_back(h * h + k * k + l * l);
    std::sort(out.begin(), out.end());
    return out;
}

double lens_volume(double r, double d)
{
    return pi * (4.0 * r + d) * (2.0 * r - d) * (2.0 * r - d) / 12.0;
}

} // namespace

TEST_CASE("reciprocal basis closes on complete shells")
{
    const auto norms = brute_norms(14);
    for (int target : {1, 9, 15, 27, 169, 531, 1243}) {
        const auto set = build_reciprocal_set(target);
        CHECK(set.count() == target);
        // every vector of the set is no longer than every excluded vector
        const int cut = set.max_norm2();
        const auto inside = std::count_if(norms.begin(), norms.end(), [cut](int n) { return n <= cut; });
        CHECK(inside == set.count());
        CHECK(next_shell_norm2(set) > cut);
        std::set<std::array<int, 3>> seen;
        for (const auto& g : set.indices) seen.insert({g[0], g[1], g[2]});
        for (const auto& g : set.indices) CHECK(seen.count({-g[0], -g[1], -g[2]}) == 1);
    }
    const auto one = build_reciprocal_set(1);
    CHECK(one.indices[0] == vec3i::Zero());
    CHECK(build_reciprocal_set(10).count() == 15);
    CHECK_THROWS_AS(build_reciprocal_set(0), ConfigError);
}

TEST_CASE("primitive coordinates invert the reciprocal basis")
{
    const mat3 a = primitive_vectors();
    const mat3 b = reciprocal_vectors();
    CHECK((a.transpose() * b - mat3::Identity()).norm() < 1e-15);
    CHECK(std::abs(a.determinant()) == doctest::Approx(cell_volume));
    for (const auto& g : build_reciprocal_set(169).indices) {
        const vec3i m = to_primitive(g);
        CHECK((b * m.cast<double>() - g.cast<double>()).norm() < 1e-14);
    }
}

TEST_CASE("permittivity coefficients of non-overlapping spheres")
{
    LatticeSpec none;
    none.r_over_a = 0.0;
    CHECK(epsilon_fourier(none, vec3i(0, 0, 0)).real() == doctest::Approx(11.76));
    CHECK(std::abs(epsilon_fourier(none, vec3i(1, 1, 1))) < 1e-15);

    LatticeSpec spec;
    spec.r_over_a = 0.25;
    const double fv = 16.0 * pi / 3.0 * 0.25 * 0.25 * 0.25;
    CHECK(fv == doctest::Approx(0.2617993877991494));
    const DielectricFourier eps(spec);
    CHECK_FALSE(eps.uses_quadrature());
    CHECK(eps(vec3i::Zero()).real() == doctest::Approx(11.76 - fv * 10.76).epsilon(1e-12));

    // Monte-Carlo volume fraction over the primitive cell
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const mat3 a = primitive_vectors();
    const int samples = 400000;
    int hits = 0;
    for (int i = 0; i < samples; ++i)
        if (distance_to_nearest_site(a * vec3(u(rng), u(rng), u(rng))) < 0.25) ++hits;
    const double mc = double(hits) / samples;
    CHECK(std::abs(mc - fv) < 4.0 * std::sqrt(fv * (1 - fv) / samples));
    CHECK(1.0 - eps.backbone_indicator(vec3i::Zero()) == doctest::Approx(fv).epsilon(1e-12));

    for (const auto& g : build_reciprocal_set(169).indices) {
        const cplx p = eps(g), m = eps(vec3i(-g));
        CHECK(std::abs(p - m) < 1e-15);
        CHECK(p.imag() == 0.0);
    }
}

TEST_CASE("lossy backbone: real and imaginary parts are separately even")
{
    LatticeSpec spec;
    spec.eps_backbone_imag = 0.05;
    const DielectricFourier eps(spec);
    for (const auto& g : build_reciprocal_set(59).indices) {
        const cplx p = eps(g), m = eps(vec3i(-g));
        CHECK(std::abs(p - m) < 1e-15);
        if (!g.isZero()) CHECK(p.imag() == doctest::Approx(0.05 * eps.backbone_indicator(g)).epsilon(1e-12));
    }
    CHECK(eps(vec3i::Zero()).imag() == doctest::Approx(0.05 * (1.0 - spec.sphere_fraction())).epsilon(1e-12));
}

TEST_CASE("overlapping spheres switch to quadrature")
{
    LatticeSpec spec;
    spec.r_over_a = 0.37;
    CHECK(spec.overlapping());
    const DielectricFourier eps(spec, 3);
    CHECK(eps.uses_quadrature());

    // Below R = a/sqrt(6) only pairs overlap: 12 lenses per sphere, each shared.
    const double d = 1.0 / std::sqrt(2.0);
    const double union_fraction = (4.0 * pi / 3.0 * std::pow(0.37, 3) - 6.0 * lens_volume(0.37, d)) / cell_volume;
    CHECK(1.0 - eps.backbone_indicator(vec3i::Zero()) == doctest::Approx(union_fraction).epsilon(2e-5));

    // nonzero G against a direct Monte-Carlo transform of the union indicator
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const mat3 a = primitive_vectors();
    const vec3i g(1, 1, 1);
    const int samples = 400000;
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const vec3 r = a * vec3(u(rng), u(rng), u(rng));
        if (distance_to_nearest_site(r) < 0.37) acc += std::cos(two_pi * g.cast<double>().dot(r));
    }
    CHECK(std::abs(-eps.backbone_indicator(g) - acc / samples) < 3e-3);

    LatticeSpec bad;
    bad.r_over_a = 0.6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.r_over_a = 0.3;
    bad.eps_backbone_imag = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("nearest lattice site")
{
    CHECK(distance_to_nearest_site(vec3(0, 0, 0)) == 0.0);
    CHECK(distance_to_nearest_site(vec3(0.5, 0.5, 0)) == doctest::Approx(0.0));
    CHECK(distance_to_nearest_site(vec3(0.5, 0, 0)) == doctest::Approx(0.5));
    CHECK(distance_to_nearest_site(vec3(0.25, 0.25, 0.25)) == doctest::Approx(std::sqrt(3.0) / 4.0));
    CHECK(distance_to_nearest_site(vec3(0.26, 0.24, 0.0)) == doctest::Approx(std::hypot(0.24, 0.26)));
}

TEST_CASE("k-point mesh")
{
    const auto gamma = build_kmesh(1, false);
    REQUIRE(gamma.size() == 1);
    CHECK(gamma.points.col(0).norm() == 0.0);
    CHECK(gamma.weights[0] == doctest::Approx(bz_volume));

    for (int n : {2, 3, 6, 7}) {
        for (bool half : {false, true}) {
            const auto mesh = build_kmesh(n, half);
            CHECK(mesh.weights.sum() == doctest::Approx(bz_volume).epsilon(1e-12));
            CHECK((mesh.weights.array() > 0).all());
            for (int i = 0; i < mesh.size(); ++i) CHECK(in_first_bz(mesh.points.col(i), 1e-12));
            if (half) {
                std::map<std::array<long, 3>, int> seen;
                auto key = [](const vec3& k) {
                    return std::array<long, 3>{std::lround(k[0] * 1e9), std::lround(k[1] * 1e9), std::lround(k[2] * 1e9)};
                };
                for (int i = 0; i < mesh.size(); ++i) seen[key(mesh.points.col(i))] = i;
                for (int i = 0; i < mesh.size(); ++i) {
                    const vec3 k = mesh.points.col(i);
                    // a partner -k (modulo G) may only be the point itself
                    const vec3 mk = fold_to_bz(-k);
                    const auto it = seen.find(key(mk));
                    if (it != seen.end()) CHECK(it->second == i);
                }
            }
        }
    }
    CHECK(build_kmesh(47, true).size() == 51912);
    CHECK_THROWS_AS(build_kmesh(0, false), ConfigError);
}

TEST_CASE("zone folding")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const vec3 k(u(rng), u(rng), u(rng));
        const vec3 f = fold_to_bz(k);
        CHECK(in_first_bz(f, 1e-12));
        const vec3 g = k - f;
        CHECK(is_reciprocal_vector(g.array().round().cast<int>().matrix()));
        CHECK((g - g.array().round().matrix()).norm() < 1e-12);
    }
    CHECK(in_first_bz(bz_point("X")));
    CHECK(in_first_bz(bz_point("L")));
    CHECK(in_first_bz(bz_point("W")));
    CHECK(in_first_bz(bz_point("U")));
    CHECK(in_first_bz(bz_point("K")));
    CHECK_FALSE(in_first_bz(vec3(1.01, 0, 0)));
}

TEST_CASE("Wigner-Seitz labels")
{
    CHECK(ws_point("Gamma").position.norm() == 0.0);
    CHECK(ws_point("G").label == "Gamma");
    CHECK((ws_point("H").position - vec3(0.5, 0, 0)).norm() == 0.0);
    CHECK((ws_point("N").position - vec3(0.25, 0.25, 0)).norm() == 0.0);
    CHECK((ws_point("P").position - vec3(0.25, 0.25, 0.25)).norm() == 0.0);
    CHECK_THROWS_AS(ws_point("Q"), ConfigError);

    // H is the point of the cube axis farthest from every sphere centre
    double best = 0.0, arg = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double t = 0.5 * i / 1000.0;
        const double d = distance_to_nearest_site(vec3(t, 0, 0));
        if (d > best) {
            best = d;
            arg = t;
        }
    }
    CHECK(arg == doctest::Approx(0.5));
    // N is the face centre half way to the nearest neighbour at (1/2)(1,1,0)
    CHECK(distance_to_nearest_site(ws_point("N").position) == doctest::Approx(std::sqrt(2.0) / 4.0));

    WignerSeitzTable table;
    table.set("H", vec3(0.5, 0.0, 0.0) * 0.5);
    CHECK(table("H").position[0] == doctest::Approx(0.25));
}
