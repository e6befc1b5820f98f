#include <fracdecay/parallel.hpp>
#include <fracdecay/pwe.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>

namespace fracdecay::pwe {

DielectricMatrix::DielectricMatrix(const crystal::LatticeSpec& spec, const crystal::ReciprocalSet& basis)
    : m_spec(spec), m_basis(basis)
{
    const int n = basis.count();
    int max_index = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const vec3i d = basis.indices[i] - basis.indices[j];
            max_index = std::max(max_index, crystal::to_primitive(d).cwiseAbs().maxCoeff());
        }
    const crystal::DielectricFourier eps(spec, max_index);
    m_quadrature = eps.uses_quadrature();

    m_eps.resize(n, n);
    m_backbone.resize(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i) {
            const vec3i d = basis.indices[i] - basis.indices[j];
            m_eps(i, j) = m_eps(j, i) = eps.real(d);
            m_backbone(i, j) = m_backbone(j, i) = eps.backbone_indicator(d);
        }

    Eigen::LLT<matx> llt(m_eps);
    if (llt.info() != Eigen::Success) throw NumericalError("eps(G - G') is not positive definite");
    m_rcond = llt.rcond();
    if (!(m_rcond > 1e-14)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "eps(G - G') is numerically singular (rcond = %.3e)", m_rcond);
        throw NumericalError(buf);
    }
    m_inv = llt.solve(matx::Identity(n, n));
    m_inv = (0.5 * (m_inv + m_inv.transpose())).eval();
}

void transverse_triad(const vec3& q, vec3& e1, vec3& e2)
{
    const double qn = q.norm();
    if (qn < 1e-14) {
        e1 = vec3::UnitX();
        e2 = vec3::UnitY();
        return;
    }
    const vec3 qh = q / qn;
    // Use the axis least aligned with q as the reference so e1 is well defined.
    int axis = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(qh[i]) < std::abs(qh[axis])) axis = i;
    e1 = qh.cross(vec3::Unit(axis)).normalized();
    e2 = qh.cross(e1);
}

BlochProblem assemble(const DielectricMatrix& dielectric, const vec3& k)
{
    const auto& basis = dielectric.basis();
    const int n = basis.count();
    BlochProblem p;
    p.k = k;
    p.dielectric = &dielectric;
    p.q.resize(3, n);
    p.e1.resize(3, n);
    p.e2.resize(3, n);
    p.qnorm.resize(n);
    for (int i = 0; i < n; ++i) {
        const vec3 q = k + basis.g.col(i);
        vec3 a, b;
        transverse_triad(q, a, b);
        p.q.col(i) = q;
        p.e1.col(i) = a;
        p.e2.col(i) = b;
        p.qnorm[i] = q.norm();
    }

    // curl eps^-1 curl in the (e1, e2) basis: q x e1 = |q| e2, q x e2 = -|q| e1.
    const matx& eta = dielectric.inverse();
    const matx c22 = p.e2.transpose() * p.e2;
    const matx c21 = p.e2.transpose() * p.e1;
    const matx c11 = p.e1.transpose() * p.e1;
    const matx scale = p.qnorm * p.qnorm.transpose();
    const matx w = eta.cwiseProduct(scale);

    p.op.resize(2 * n, 2 * n);
    p.op.topLeftCorner(n, n) = w.cwiseProduct(c22);
    p.op.topRightCorner(n, n) = -w.cwiseProduct(c21);
    p.op.bottomLeftCorner(n, n) = -w.cwiseProduct(c21.transpose());
    p.op.bottomRightCorner(n, n) = w.cwiseProduct(c11);
    return p;
}

double hermiticity_residual(const BlochProblem& problem)
{
    const double nrm = problem.op.norm();
    if (nrm == 0.0) return 0.0;
    return (problem.op - problem.op.adjoint()).norm() / nrm;
}

bool BandSolution::has_field(int band) const
{
    const int j = band - first_field_band;
    return j >= 0 && j < static_cast<int>(e_coeffs.size()) && field_valid[j];
}

const mat3x& BandSolution::field(int band) const
{
    const int j = band - first_field_band;
    if (j < 0 || j >= static_cast<int>(e_coeffs.size()))
        throw NumericalError("field for band " + std::to_string(band + 1) + " was not computed");
    if (!field_valid[j])
        throw NumericalError("field for band " + std::to_string(band + 1) +
                             " is undefined at zero frequency");
    return e_coeffs[j];
}

BandSolution eigensolve(const BlochProblem& problem, const SolveOptions& options)
{
    if (options.n_bands > problem.dimension())
        throw NumericalError("n_bands exceeds operator dimension");
    SelectiveEigenSolver<matx> es;
    es.compute(problem.op, options.n_bands, options.first_field_band, options.n_fields);

    BandSolution s;
    s.k = problem.k;
    s.q = problem.q;
    s.omegas = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    s.first_field_band = options.first_field_band;
    if (options.n_fields == 0) return s;

    const int n = problem.dielectric->size();
    const matx& eta = problem.dielectric->inverse();
    const double norm = 1.0 / std::sqrt(crystal::cell_volume);
    s.e_coeffs.resize(options.n_fields);
    s.field_valid.assign(options.n_fields, false);
    for (int j = 0; j < options.n_fields; ++j) {
        const double omega = s.omegas[options.first_field_band + j];
        if (omega < 1e-8) continue;
        const auto h1 = es.eigenvectors().col(j).head(n);
        const auto h2 = es.eigenvectors().col(j).tail(n);
        // D_G = -(q x h_G) / omega with q x e1 = |q| e2 and q x e2 = -|q| e1.
        mat3x dfield(3, n);
        for (int i = 0; i < n; ++i)
            dfield.col(i) = -problem.qnorm[i] * (h1[i] * problem.e2.col(i) - h2[i] * problem.e1.col(i)) / omega;
        // E = eps^-1 D; <E|eps|E> = D^T eta D = h^T op h / omega^2 = 1 per unit
        // cell-averaged norm, hence the 1/sqrt(V) for the cell integral.
        s.e_coeffs[j] = norm * (dfield * eta);
        s.field_valid[j] = true;
    }
    return s;
}

std::vector<BandSolution> solve_points(const DielectricMatrix& dielectric, const mat3x& points,
                                       const SolveOptions& options, unsigned threads)
{
    return parallel_map<BandSolution>(static_cast<std::size_t>(points.cols()), threads, [&](std::size_t i) {
        return eigensolve(assemble(dielectric, points.col(static_cast<Eigen::Index>(i))), options);
    });
}

ModeField::ModeField(const BandSolution& solution, int band)
    : m_q(solution.q), m_coeffs(solution.field(band))
{
}

cvec3 ModeField::operator()(const vec3& r) const
{
    cvec3 e = cvec3::Zero();
    for (Eigen::Index i = 0; i < m_q.cols(); ++i) {
        const cplx ph = std::polar(1.0, two_pi * m_q.col(i).dot(r));
        e += m_coeffs.col(i).cast<cplx>() * ph;
    }
    return e;
}

cvec3 reconstruct_field(const BandSolution& solution, int band, const vec3& r)
{
    return ModeField(solution, band)(r);
}

double cell_inner_product(const matx& a, const mat3x& ea, const mat3x& eb)
{
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += ea.row(c).dot(a * eb.row(c).transpose());
    return crystal::cell_volume * s;
}

double f_factor(const BandSolution& solution, int band, const DielectricMatrix& dielectric)
{
    const auto& spec = dielectric.spec();
    const mat3x& e = solution.field(band);
    const double num = spec.eps_backbone_real * cell_inner_product(dielectric.backbone(), e, e);
    const double den = cell_inner_product(dielectric.eps(), e, e);
    return num / den;
}

void write_band_table(std::ostream& os, const std::vector<BandSolution>& solutions)
{
    os << "# columns: k_index band kx ky kz omega  (k in 2pi/a, omega in 2pi c/a)\n";
    char buf[160];
    for (std::size_t i = 0; i < solutions.size(); ++i) {
        const auto& s = solutions[i];
        for (Eigen::Index n = 0; n < s.omegas.size(); ++n) {
            std::snprintf(buf, sizeof buf, "%zu %ld %.12f %.12f %.12f %.15e\n", i, static_cast<long>(n + 1), s.k[0],
                          s.k[1], s.k[2], s.omegas[n]);
            os << buf;
        }
    }
}

} // namespace fracdecay::pwe
