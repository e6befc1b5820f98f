#pragma once

#include <Eigen/Core>
#include <complex>
#include <stdexcept>
#include <string>

namespace fracdecay {

template <class Scalar, int Rows = Eigen::Dynamic>
using vec_type = Eigen::Matrix<Scalar, Rows, 1>;

template <class Scalar, int Rows = Eigen::Dynamic, int Cols = Eigen::Dynamic>
using mat_type = Eigen::Matrix<Scalar, Rows, Cols, Eigen::ColMajor>;

template <class Scalar>
using vec3_type = vec_type<Scalar, 3>;

template <class Scalar>
using mat3_type = mat_type<Scalar, 3, 3>;

using cplx = std::complex<double>;
using vec3 = vec3_type<double>;
using cvec3 = vec3_type<cplx>;
using mat3 = mat3_type<double>;
using vec3i = vec3_type<int>;
using vecx = vec_type<double>;
using cvecx = vec_type<cplx>;
using matx = mat_type<double>;
using cmatx = mat_type<cplx>;
using mat3x = mat_type<double, 3, Eigen::Dynamic>;
using cmat3x = mat_type<cplx, 3, Eigen::Dynamic>;

template <class T>
inline constexpr T pi_v = T(3.141592653589793238462643383279502884L);

inline constexpr double pi = pi_v<double>;
inline constexpr double two_pi = 2.0 * pi;

// Invalid user input: bad config values, out-of-range geometry.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure failed to deliver a result at the requested accuracy.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fracdecay
