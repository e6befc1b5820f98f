#pragma once

// Plane-wave expansion of the Maxwell Bloch problem for the magnetic field,
// curl (eps^-1 curl H) = (omega/c)^2 H, with H transverse in each plane wave.
// Frequencies are normalized, omega a / (2 pi c).

#include <fracdecay/crystal.hpp>
#include <fracdecay/types.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <iosfwd>
#include <random>
#include <vector>

namespace fracdecay::pwe {

/// eps(G - G') on a plane-wave basis, its inverse and the backbone indicator
/// matrix. Only the real part of the permittivity enters.
class DielectricMatrix
{
public:
    DielectricMatrix(const crystal::LatticeSpec& spec, const crystal::ReciprocalSet& basis);

    const crystal::LatticeSpec& spec() const { return m_spec; }
    const crystal::ReciprocalSet& basis() const { return m_basis; }
    int size() const { return m_basis.count(); }

    const matx& eps() const { return m_eps; }
    const matx& inverse() const { return m_inv; }
    const matx& backbone() const { return m_backbone; }

    /// Reciprocal condition estimate of eps(G - G') from the Cholesky factor.
    double rcond() const { return m_rcond; }
    bool uses_quadrature() const { return m_quadrature; }

private:
    crystal::LatticeSpec m_spec;
    crystal::ReciprocalSet m_basis;
    matx m_eps, m_inv, m_backbone;
    double m_rcond = 0.0;
    bool m_quadrature = false;
};

/// Orthonormal e1, e2 with (e1, e2, q/|q|) right handed. Any fixed pair is
/// returned for q = 0.
void transverse_triad(const vec3& q, vec3& e1, vec3& e2);

struct BlochProblem
{
    vec3 k = vec3::Zero();
    const DielectricMatrix* dielectric = nullptr;
    mat3x q, e1, e2;
    vecx qnorm;
    matx op;   // 2N x 2N, ordered (e1 block, e2 block)

    int dimension() const { return static_cast<int>(op.rows()); }
};

BlochProblem assemble(const DielectricMatrix& dielectric, const vec3& k);

/// ||A - A^T||_F / ||A||_F.
double hermiticity_residual(const BlochProblem& problem);

/// Lowest eigenvalues of a self-adjoint matrix with eigenvectors for a chosen
/// contiguous subset only. Householder tridiagonalization, implicit QR for the
/// eigenvalues, inverse iteration on the tridiagonal for the vectors and one
/// back transformation.
template <class MatrixType>
class SelectiveEigenSolver
{
public:
    using Scalar = typename MatrixType::Scalar;
    using RealScalar = typename Eigen::NumTraits<Scalar>::Real;
    using RealVector = vec_type<RealScalar>;
    using RealMatrix = mat_type<RealScalar>;

    SelectiveEigenSolver& compute(const MatrixType& a, int n_values, int first_vector, int n_vectors);

    /// Lowest n_values eigenvalues, ascending.
    const RealVector& eigenvalues() const { return m_values; }

    /// Column j belongs to eigenvalue first_vector + j.
    const MatrixType& eigenvectors() const { return m_vectors; }

private:
    RealVector inverse_iteration(RealScalar lambda, const std::vector<RealVector>& cluster, int seed) const;

    RealVector m_diag, m_sub;
    RealVector m_values;
    MatrixType m_vectors;
};

struct BandSolution
{
    vec3 k = vec3::Zero();
    vecx omegas;
    int first_field_band = 0;
    std::vector<mat3x> e_coeffs;   // normalized electric-field amplitudes, 3 x N each
    std::vector<bool> field_valid;
    mat3x q;

    bool has_field(int band) const;
    const mat3x& field(int band) const;
};

struct SolveOptions
{
    int n_bands = 10;
    int first_field_band = 0;
    int n_fields = 0;
};

BandSolution eigensolve(const BlochProblem& problem, const SolveOptions& options);

/// Bands and fields for many k-points; results are ordered as `points`.
std::vector<BandSolution> solve_points(const DielectricMatrix& dielectric, const mat3x& points,
                                       const SolveOptions& options, unsigned threads);

/// E(r) = sum_G E_G exp(i (k + G).r), normalized so <E|eps_R|E>_cell = 1.
class ModeField
{
public:
    ModeField(const BandSolution& solution, int band);

    cvec3 operator()(const vec3& r) const;

    double normalization_volume() const { return crystal::cell_volume; }
    const mat3x& coefficients() const { return m_coeffs; }

private:
    mat3x m_q;
    mat3x m_coeffs;
};

cvec3 reconstruct_field(const BandSolution& solution, int band, const vec3& r);

/// <E_a| A |E_b>_cell for a matrix A over the basis (eps, backbone, identity...).
double cell_inner_product(const matx& a, const mat3x& ea, const mat3x& eb);

/// Fraction of the electric energy density that sits in the backbone.
double f_factor(const BandSolution& solution, int band, const DielectricMatrix& dielectric);

/// Rows "k_index band kx ky kz omega", band 1-based.
void write_band_table(std::ostream& os, const std::vector<BandSolution>& solutions);

// ---------------------------------------------------------------------------

template <class MatrixType>
SelectiveEigenSolver<MatrixType>&
SelectiveEigenSolver<MatrixType>::compute(const MatrixType& a, int n_values, int first_vector, int n_vectors)
{
    const int n = static_cast<int>(a.rows());
    if (n_values < 1 || n_values > n) throw NumericalError("requested band count exceeds operator dimension");
    if (first_vector < 0 || n_vectors < 0 || first_vector + n_vectors > n_values)
        throw NumericalError("requested eigenvector range outside the solved bands");

    Eigen::Tridiagonalization<MatrixType> tri(a);
    m_diag = tri.diagonal().real();
    m_sub = tri.subDiagonal().real();

    // The QR sweep is run on the scaled tridiagonal, as the full solver does;
    // unscaled input with exact zeros on the diagonal can stall it.
    RealScalar scale = m_diag.cwiseAbs().maxCoeff();
    if (n > 1) scale = std::max(scale, m_sub.cwiseAbs().maxCoeff());
    if (scale == RealScalar(0)) scale = RealScalar(1);
    const RealVector sd = m_diag / scale, ss = m_sub / scale;
    Eigen::SelfAdjointEigenSolver<RealMatrix> es;
    es.computeFromTridiagonal(sd, ss, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("tridiagonal QR iteration did not converge");
    m_values = scale * es.eigenvalues().head(n_values);

    if (n_vectors == 0) {
        m_vectors.resize(n, 0);
        return *this;
    }

    RealScalar norm = RealScalar(0);
    for (int i = 0; i < n; ++i) {
        RealScalar row = std::abs(m_diag[i]);
        if (i > 0) row += std::abs(m_sub[i - 1]);
        if (i + 1 < n) row += std::abs(m_sub[i]);
        norm = std::max(norm, row);
    }
    const RealScalar cluster_tol = RealScalar(1e-3) * norm;

    RealMatrix z(n, n_vectors);
    std::vector<RealVector> cluster;
    for (int j = 0; j < n_vectors; ++j) {
        const int idx = first_vector + j;
        if (j > 0 && m_values[idx] - m_values[idx - 1] > cluster_tol) cluster.clear();
        if (j == 0) {
            // Earlier members of a cluster straddling first_vector still need
            // to be projected out.
            for (int p = idx - 1; p >= 0 && m_values[p + 1] - m_values[p] <= cluster_tol; --p)
                cluster.insert(cluster.begin(), inverse_iteration(m_values[p], cluster, p));
        }
        RealVector v = inverse_iteration(m_values[idx], cluster, idx);
        z.col(j) = v;
        cluster.push_back(v);
    }
    m_vectors = tri.matrixQ() * z.template cast<Scalar>();
    return *this;
}

template <class MatrixType>
typename SelectiveEigenSolver<MatrixType>::RealVector
SelectiveEigenSolver<MatrixType>::inverse_iteration(RealScalar lambda, const std::vector<RealVector>& cluster,
                                                    int seed) const
{
    const int n = static_cast<int>(m_diag.size());
    const RealScalar eps = Eigen::NumTraits<RealScalar>::epsilon();
    RealScalar scale = RealScalar(0);
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(m_diag[i]));
    for (int i = 0; i + 1 < n; ++i) scale = std::max(scale, std::abs(m_sub[i]));
    const RealScalar tiny = std::max(eps * scale, std::numeric_limits<RealScalar>::min());

    // LU with partial pivoting of T - lambda I (the tridiagonal analogue of
    // getrf): U keeps two superdiagonals, dl holds the multipliers.
    RealVector d = m_diag.array() - lambda;
    RealVector dl = m_sub, du = m_sub;
    RealVector du2 = RealVector::Zero(std::max(n - 2, 0));
    std::vector<char> swapped(std::max(n - 1, 0), 0);
    for (int i = 0; i + 1 < n; ++i) {
        if (std::abs(d[i]) >= std::abs(dl[i])) {
            if (d[i] == RealScalar(0)) d[i] = tiny;
            const RealScalar fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            const RealScalar fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            const RealScalar temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if (i + 2 < n) {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du[i + 1];
            }
            swapped[i] = 1;
        }
    }
    for (int i = 0; i < n; ++i)
        if (std::abs(d[i]) < tiny) d[i] = (d[i] < RealScalar(0)) ? -tiny : tiny;

    auto solve = [&](RealVector& x) {
        for (int i = 0; i + 1 < n; ++i) {
            if (!swapped[i]) {
                x[i + 1] -= dl[i] * x[i];
            } else {
                const RealScalar temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - dl[i] * x[i];
            }
        }
        for (int i = n - 1; i >= 0; --i) {
            RealScalar s = x[i];
            if (i + 1 < n) s -= du[i] * x[i + 1];
            if (i + 2 < n) s -= du2[i] * x[i + 2];
            x[i] = s / d[i];
        }
    };

    std::mt19937_64 rng(0x9e3779b97f4a7c15ull + static_cast<unsigned long long>(seed));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    RealVector x(n);
    for (int i = 0; i < n; ++i) x[i] = RealScalar(dist(rng));

    for (int it = 0; it < 4; ++it) {
        for (const auto& c : cluster) x -= c.dot(x) * c;
        x.normalize();
        solve(x);
        for (const auto& c : cluster) x -= c.dot(x) * c;
        const RealScalar nrm = x.norm();
        if (!(nrm > RealScalar(0)) || !std::isfinite(static_cast<double>(nrm)))
            throw NumericalError("inverse iteration broke down");
        x /= nrm;
    }
    for (const auto& c : cluster) x -= c.dot(x) * c;
    x.normalize();
    return x;
}

} // namespace fracdecay::pwe
