#include "imocap/rotmath.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

#include "imocap/errors.hpp"

namespace imocap {

Mat3 rot6d_to_matrix(const Rot6d& r) {
  Vec3 a = r.head<3>();
  Vec3 b = r.tail<3>();
  double na = a.norm();
  if (na < 1e-8) throw DegenerateInput("rot6d: first column near zero");
  Vec3 c1 = a / na;
  Vec3 b_perp = b - c1.dot(b) * c1;
  double nb = b_perp.norm();
  // ‖b_perp‖ = ‖b‖·sin(angle), so this also rejects near-zero b.
  if (nb < 1e-8 * std::max(1.0, b.norm()))
    throw DegenerateInput("rot6d: columns near parallel");
  Vec3 c2 = b_perp / nb;
  Mat3 out;
  out.col(0) = c1;
  out.col(1) = c2;
  out.col(2) = c1.cross(c2);
  return out;
}

Rot6d matrix_to_rot6d(const Mat3& r) {
  Rot6d out;
  out.head<3>() = r.col(0);
  out.tail<3>() = r.col(1);
  return out;
}

double geodesic_angle_deg(const Mat3& ra, const Mat3& rb) {
  double c = ((ra.transpose() * rb).trace() - 1.0) / 2.0;
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c) * kDegPerRad;
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  Mat3 gram = r.transpose() * r;
  return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 project_to_rotation(const Mat3& m) {
  if (std::abs(m.determinant()) < 1e-12)
    throw DegenerateInput("project_to_rotation: singular input");
  Mat3 x = m;
  for (int it = 0; it < 100; ++it) {
    Mat3 next = 0.5 * (x + x.transpose().inverse());
    double delta = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (delta < 1e-15) break;
  }
  if (x.determinant() < 0.0)
    throw DegenerateInput("project_to_rotation: reflection, not a rotation");
  return x;
}

Mat3 chordal_mean(const std::vector<Mat3>& rs) {
  if (rs.empty()) throw EmptyInput("chordal_mean: no rotations");
  Mat3 sum = Mat3::Zero();
  for (const Mat3& r : rs) sum += r;
  return project_to_rotation(sum / static_cast<double>(rs.size()));
}

Mat3 rot_x(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitX()).toRotationMatrix();
}

Mat3 rot_y(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitY()).toRotationMatrix();
}

Mat3 rot_z(double rad) {
  return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace imocap
