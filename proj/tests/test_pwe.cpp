#include <doctest.h>

#include <fracdecay/pwe.hpp>

#include <algorithm>
#include <random>

using namespace fracdecay;
using namespace fracdecay::crystal;
using namespace fracdecay::pwe;

namespace {

LatticeSpec empty_lattice()
{
    LatticeSpec s;
    s.r_over_a = 0.0;
    s.eps_backbone_real = 1.0;
    return s;
}

LatticeSpec inverse_opal()
{
    LatticeSpec s;
    s.r_over_a = 0.3436;
    s.eps_backbone_real = 11.76;
    return s;
}

// Cell integral of conj(A(r)).B(r) on a uniform grid in primitive
// coordinates; exact for the band-limited fields involved.
cplx grid_overlap(const mat3x& q, const mat3x& a, const mat3x& b, int n)
{
    const mat3 prim = primitive_vectors();
    cplx acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const vec3 r = prim * vec3(double(i) / n, double(j) / n, double(k) / n);
                cvec3 fa = cvec3::Zero(), fb = cvec3::Zero();
                for (Eigen::Index g = 0; g < q.cols(); ++g) {
                    const cplx ph = std::polar(1.0, two_pi * q.col(g).dot(r));
                    fa += a.col(g).cast<cplx>() * ph;
                    fb += b.col(g).cast<cplx>() * ph;
                }
                acc += fa.dot(fb);
            }
    return acc * cell_volume / double(n * n * n);
}

} // namespace

TEST_CASE("empty lattice reproduces |k + G| with double multiplicity")
{
    const auto basis = build_reciprocal_set(169);
    const DielectricMatrix eps(empty_lattice(), basis);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const vec3 k = fold_to_bz(vec3(u(rng), u(rng), u(rng)));
        const auto p = assemble(eps, k);
        CHECK(p.dimension() == 338);
        const auto s = eigensolve(p, {338, 0, 0});
        std::vector<double> ref;
        for (int i = 0; i < basis.count(); ++i) {
            ref.push_back((k + basis.g.col(i)).norm());
            ref.push_back(ref.back());
        }
        std::sort(ref.begin(), ref.end());
        for (int n = 0; n < 338; ++n) worst = std::max(worst, std::abs(s.omegas[n] - ref[n]) / ref[n]);
    }
    CHECK(worst < 1e-10);

    const auto gamma = eigensolve(assemble(eps, vec3::Zero()), {4, 0, 0});
    CHECK(gamma.omegas[0] == 0.0);
    CHECK(gamma.omegas[1] == 0.0);
    CHECK(gamma.omegas[2] == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("operator is symmetric for the inverse opal")
{
    const auto basis = build_reciprocal_set(169);
    const DielectricMatrix eps(inverse_opal(), basis);
    CHECK(eps.rcond() > 1e-6);
    for (const char* label : {"X", "L", "W", "U"}) {
        const auto p = assemble(eps, bz_point(label));
        CHECK(hermiticity_residual(p) < 1e-10);
    }
    // transverse triads
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const vec3 q(u(rng), u(rng), u(rng));
        vec3 e1, e2;
        transverse_triad(q, e1, e2);
        CHECK(std::abs(e1.dot(q)) < 1e-14);
        CHECK(std::abs(e2.dot(q)) < 1e-14);
        CHECK((e1.cross(e2) - q.normalized()).norm() < 1e-14);
    }
}

TEST_CASE("selective eigensolver matches the full solver")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    matx a(120, 120);
    for (int i = 0; i < 120; ++i)
        for (int j = 0; j < 120; ++j) a(i, j) = n01(rng);
    a = (a + a.transpose()).eval();
    // force an exact degeneracy
    Eigen::SelfAdjointEigenSolver<matx> full(a);
    vecx vals = full.eigenvalues();
    vals[4] = vals[3];
    a = full.eigenvectors() * vals.asDiagonal() * full.eigenvectors().transpose();
    a = (0.5 * (a + a.transpose())).eval();

    SelectiveEigenSolver<matx> sel;
    sel.compute(a, 10, 2, 6);
    CHECK((sel.eigenvalues() - vals.head(10)).cwiseAbs().maxCoeff() < 1e-11);
    const matx& v = sel.eigenvectors();
    CHECK((v.transpose() * v - matx::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-11);
    for (int j = 0; j < 6; ++j) CHECK((a * v.col(j) - vals[2 + j] * v.col(j)).norm() < 1e-10);

    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic> h(40, 40);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 40; ++j) h(i, j) = cplx(n01(rng), n01(rng));
    h = (h + h.adjoint()).eval();
    SelectiveEigenSolver<Eigen::MatrixXcd> csel;
    csel.compute(h, 5, 0, 5);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> cfull(h);
    CHECK((csel.eigenvalues() - cfull.eigenvalues().head(5)).cwiseAbs().maxCoeff() < 1e-11);
    for (int j = 0; j < 5; ++j)
        CHECK((h * csel.eigenvectors().col(j) - csel.eigenvalues()[j] * csel.eigenvectors().col(j)).norm() < 1e-10);
}

TEST_CASE("complete gap between bands 8 and 9")
{
    const auto basis = build_reciprocal_set(169);
    const DielectricMatrix eps(inverse_opal(), basis);
    const auto mesh = build_kmesh(6, true);
    mat3x pts(3, mesh.size() + 5);
    pts.leftCols(mesh.size()) = mesh.points;
    int c = mesh.size();
    for (const char* label : {"X", "L", "W", "U", "K"}) pts.col(c++) = bz_point(label);
    const auto sols = solve_points(eps, pts, {10, 0, 0}, 0);
    double top8 = 0.0, bottom9 = 1e9;
    for (const auto& s : sols) {
        top8 = std::max(top8, s.omegas[7]);
        bottom9 = std::min(bottom9, s.omegas[8]);
    }
    CHECK(bottom9 > top8);
    // the upper edge sits at X
    const auto x = eigensolve(assemble(eps, bz_point("X")), {10, 0, 0});
    CHECK(x.omegas[8] == doctest::Approx(bottom9).epsilon(1e-12));
    MESSAGE("gap " << top8 << " .. " << bottom9 << ", relative width " << 2 * (bottom9 - top8) / (bottom9 + top8));
}

TEST_CASE("field normalization, orthogonality and f factor")
{
    const auto basis = build_reciprocal_set(59);
    const DielectricMatrix eps(inverse_opal(), basis);
    const auto s = eigensolve(assemble(eps, bz_point("X")), {10, 6, 4});

    for (int b = 6; b < 10; ++b) {
        const mat3x& e = s.field(b);
        CHECK(cell_inner_product(eps.eps(), e, e) == doctest::Approx(1.0).epsilon(1e-10));
        // independent real-space quadrature of conj(E).D with D = eps E
        const mat3x d = e * eps.eps();
        const cplx norm = grid_overlap(s.q, e, d, 12);
        CHECK(std::abs(norm - 1.0) < 1e-6);
    }
    const cplx ortho = grid_overlap(s.q, s.field(7), s.field(8) * eps.eps(), 12);
    CHECK(std::abs(ortho) < 1e-6);

    // f by the matrix route and by Monte-Carlo integration of the same field
    const double f = f_factor(s, 8, eps);
    CHECK(f > 0.0);
    CHECK(f < 1.0);
    const ModeField field(s, 8);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const mat3 prim = primitive_vectors();
    double num = 0.0, den = 0.0;
    const int samples = 200000;
    for (int i = 0; i < samples; ++i) {
        const vec3 r = prim * vec3(u(rng), u(rng), u(rng));
        const double e2 = field(r).squaredNorm();
        if (distance_to_nearest_site(r) >= 0.3436) num += 11.76 * e2;
        const double ereal = distance_to_nearest_site(r) >= 0.3436 ? 11.76 : 1.0;
        den += ereal * e2;
    }
    MESSAGE("f matrix " << f << " Monte-Carlo " << num / den);
    CHECK(std::abs(f - num / den) < 1e-2);

    LatticeSpec uniform = inverse_opal();
    uniform.r_over_a = 0.0;
    const DielectricMatrix ueps(uniform, basis);
    const auto us = eigensolve(assemble(ueps, bz_point("X")), {4, 0, 4});
    for (int b = 0; b < 4; ++b) CHECK(f_factor(us, b, ueps) == doctest::Approx(1.0).epsilon(1e-12));

    // a single plane wave has a uniform field magnitude
    const DielectricMatrix vac(empty_lattice(), basis);
    const auto vs = eigensolve(assemble(vac, vec3(0.1, 0.2, 0.05)), {2, 0, 2});
    const ModeField pw(vs, 0);
    const double m0 = pw(vec3::Zero()).norm();
    CHECK(m0 * m0 == doctest::Approx(1.0 / cell_volume));
    CHECK(pw(vec3(0.3, 0.1, 0.7)).norm() == doctest::Approx(m0));

    const auto g = eigensolve(assemble(vac, vec3::Zero()), {2, 0, 2});
    CHECK_THROWS_AS(reconstruct_field(g, 0, vec3::Zero()), NumericalError);
}

TEST_CASE("degeneracies at X")
{
    const auto basis = build_reciprocal_set(169);
    const DielectricMatrix eps(inverse_opal(), basis);
    const auto s = eigensolve(assemble(eps, bz_point("X")), {12, 0, 0});
    int pairs = 0;
    for (int n = 0; n + 1 < 12; ++n) {
        const double rel = (s.omegas[n + 1] - s.omegas[n]) / s.omegas[n + 1];
        if (rel < 1e-6) {
            ++pairs;
            CHECK(rel < 1e-8);
        }
    }
    CHECK(pairs > 0);
}

TEST_CASE("results do not depend on the worker count")
{
    const auto basis = build_reciprocal_set(59);
    const DielectricMatrix eps(inverse_opal(), basis);
    const auto mesh = build_kmesh(3, true);
    const auto a = solve_points(eps, mesh.points, {10, 8, 1}, 1);
    const auto b = solve_points(eps, mesh.points, {10, 8, 1}, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK((a[i].omegas - b[i].omegas).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a[i].field(8) - b[i].field(8)).cwiseAbs().maxCoeff() == 0.0);
    }
}
