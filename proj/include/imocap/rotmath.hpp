#pragma once

#include <Eigen/Core>

#include <vector>

namespace imocap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// 6D rotation parametrization: the first two *columns* of a rotation
// matrix, stored column-after-column. Continuous in the rotation, hence
// friendlier to regression than quaternions or axis-angle.
using Rot6d = Eigen::Matrix<double, 6, 1>;

// Gram-Schmidt reconstruction: normalize c1, orthogonalize+normalize c2,
// third column by cross product. Invariant under positive rescaling of
// either input column. Throws DegenerateInput if c1 is near zero or the
// columns are near parallel (tolerance 1e-8).
Mat3 rot6d_to_matrix(const Rot6d& r);

// Drops the third column.
Rot6d matrix_to_rot6d(const Mat3& R);

// Geodesic distance in degrees, in [0, 180]. The acos argument is clamped
// to [-1, 1] so exact agreement cannot produce NaN.
double geodesic_angle_deg(const Mat3& ra, const Mat3& rb);

inline Mat3 compose(const Mat3& ra, const Mat3& rb) { return ra * rb; }
inline Mat3 inverse(const Mat3& r) { return r.transpose(); }

// True if R is orthonormal with determinant +1 within tol.
bool is_rotation(const Mat3& r, double tol = 1e-9);

// Nearest rotation matrix in the Frobenius sense (polar factor), computed
// by Higham's iteration X <- (X + X^-T)/2. Throws DegenerateInput if the
// input is singular or the polar factor has negative determinant.
Mat3 project_to_rotation(const Mat3& m);

// Chordal mean: arithmetic average projected back onto the rotation group.
// Well behaved for the small spreads this library feeds it (still-pose
// sensor readings). Throws EmptyInput / DegenerateInput.
Mat3 chordal_mean(const std::vector<Mat3>& rs);

// Principal-axis rotations (right-handed, radians).
Mat3 rot_x(double rad);
Mat3 rot_y(double rad);
Mat3 rot_z(double rad);

constexpr double kDegPerRad = 180.0 / 3.14159265358979323846;
constexpr double kPi = 3.14159265358979323846;

}  // namespace imocap
