#include "axisforge/tbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "axisforge/error.hpp"

namespace axisforge {

namespace {

constexpr double kDenominatorFloor = 1e-12;
constexpr double kResidualTol = 1e-9;
constexpr int A = 0, B = 1, C = 2;

struct Products {
  double OO, AO, BO, CO, AB, BC, CA;
};

Products products(const CornerImage& k, const Omega& w) {
  auto d = [&w](const Vec3& a, const Vec3& b) { return a.dot(w.m * b); };
  return {d(k.x_O, k.x_O), d(k.x[A], k.x_O), d(k.x[B], k.x_O), d(k.x[C], k.x_O),
          d(k.x[A], k.x[B]), d(k.x[B], k.x[C]), d(k.x[C], k.x[A])};
}

std::array<double, 3> rows(const Products& d, const std::array<double, 3>& l) {
  return {l[A] * l[B] * d.AB - l[A] * d.AO - l[B] * d.BO + d.OO,
          l[B] * l[C] * d.BC - l[B] * d.BO - l[C] * d.CO + d.OO,
          l[C] * l[A] * d.CA - l[C] * d.CO - l[A] * d.AO + d.OO};
}

// Polynomials as coefficient arrays, lowest degree first.
using Poly1 = std::array<double, 2>;
using Poly2 = std::array<double, 3>;

Poly2 mul(const Poly1& p, const Poly1& q) {
  return {p[0] * q[0], p[0] * q[1] + p[1] * q[0], p[1] * q[1]};
}

std::vector<double> real_roots(Poly2 p) {
  const double scale = std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2])});
  if (scale == 0.0) return {};
  for (double& c : p) c /= scale;
  const double a = p[2], b = p[1], c = p[0];
  if (std::abs(a) < 1e-14) {
    if (std::abs(b) < 1e-14) return {};
    return {-c / b};
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    // Tangent double roots perturbed below zero by rounding.
    if (disc > -1e-14) return {-b / (2.0 * a)};
    return {};
  }
  const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
  std::vector<double> out;
  out.push_back(q / a);
  if (q != 0.0) out.push_back(c / q);
  return out;
}

// Newton polish on the full system; the elimination can lose a few digits
// when a denominator is small.
void polish(const Products& d, std::array<double, 3>& l) {
  for (int it = 0; it < 3; ++it) {
    const auto f = rows(d, l);
    Eigen::Matrix3d J;
    J << l[B] * d.AB - d.AO, l[A] * d.AB - d.BO, 0.0,
         0.0, l[C] * d.BC - d.BO, l[B] * d.BC - d.CO,
         l[C] * d.CA - d.AO, 0.0, l[A] * d.CA - d.CO;
    const Eigen::Vector3d step = J.fullPivLu().solve(Eigen::Vector3d(f[0], f[1], f[2]));
    if (!step.allFinite()) return;
    std::array<double, 3> next{l[0] - step[0], l[1] - step[1], l[2] - step[2]};
    const auto fn = rows(d, next);
    auto mx = [](const std::array<double, 3>& r) {
      return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
    };
    if (mx(fn) >= mx(f)) return;
    l = next;
  }
}

double max_abs(const std::array<double, 3>& r) {
  return std::max({std::abs(r[0]), std::abs(r[1]), std::abs(r[2])});
}

}  // namespace

void LegRatios::validate() const {
  if (!(r_B > 0.0) || !(r_C > 0.0)) throw Error(ErrorCode::InvalidArgument, "leg ratios must be positive");
}

CornerImage corner_from_observation(const AxisObservation& obs, double probe_px) {
  if (!(probe_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "probe_px must be positive");
  CornerImage k;
  k.x_O = obs.origin_px.homogeneous();
  for (int i = 0; i < kNumAxes; ++i) k.x[i] = (obs.origin_px + probe_px * obs.dir[i]).homogeneous();
  return k;
}

std::array<double, kNumAxes> orthogonality_rows(const CornerImage& corner, const Omega& omega,
                                                const std::array<double, kNumAxes>& lambda) {
  return rows(products(corner, omega), lambda);
}

std::vector<CornerSolution> solve_depth_scales(const CornerImage& corner, const Omega& omega) {
  const Products d = products(corner, omega);

  // lambda_B = N / D1 from (A,B), lambda_C = N / D2 from (C,A); both linear in lambda_A.
  const Poly1 N{-d.OO, d.AO};
  const Poly1 D1{-d.BO, d.AB};
  const Poly1 D2{-d.CO, d.CA};
  // (B,C) row times D1 * D2.
  const Poly2 NN = mul(N, N), ND2 = mul(N, D2), ND1 = mul(N, D1), D12 = mul(D1, D2);
  Poly2 poly{};
  for (int i = 0; i < 3; ++i) poly[i] = d.BC * NN[i] - d.BO * ND2[i] - d.CO * ND1[i] + d.OO * D12[i];

  std::vector<CornerSolution> out;
  bool ill = false;
  for (double la : real_roots(poly)) {
    if (!std::isfinite(la)) continue;
    const double n = N[0] + N[1] * la;
    const double d1 = D1[0] + D1[1] * la;
    const double d2 = D2[0] + D2[1] * la;
    if (std::abs(d1) < kDenominatorFloor || std::abs(d2) < kDenominatorFloor) {
      ill = true;
      continue;
    }
    std::array<double, 3> l{la, n / d1, n / d2};
    polish(d, l);
    if (!std::all_of(l.begin(), l.end(), [](double v) { return std::isfinite(v) && v > 0.0; })) continue;
    const double res = max_abs(rows(d, l));
    if (!(res < kResidualTol)) continue;
    CornerSolution s;
    s.lambda = l;
    s.residual = res;
    out.push_back(s);
  }
  if (out.empty()) {
    if (ill) throw Error(ErrorCode::IllConditioned, "elimination denominator vanishes at a root");
    throw Error(ErrorCode::NoValidSolution, "no all-positive real depth scales");
  }
  return out;
}

std::vector<CornerSolution> solve_depth_scales(const CornerImage& corner, const CameraIntrinsics& K) {
  auto sols = solve_depth_scales(corner, compute_omega(K));
  const Mat3 Ki = K.inverse();
  const Vec3 rO = Ki * corner.x_O;
  for (auto& s : sols)
    for (int i = 0; i < kNumAxes; ++i) s.legs[i] = s.lambda[i] * (Ki * corner.x[i]) - rO;
  return sols;
}

std::array<Vec3, 4> corner_vertices(const Pose& pose, const LegRatios& ratios, double leg_length) {
  ratios.validate();
  const std::array<double, 3> len{leg_length, leg_length * ratios.r_B, leg_length * ratios.r_C};
  std::array<Vec3, 4> v;
  v[0] = pose.T;
  for (int i = 0; i < kNumAxes; ++i) v[i + 1] = pose.T + len[i] * pose.R.col(i);
  return v;
}

double axis_reprojection_residual(const AxisObservation& obs, const CameraIntrinsics& K, const Pose& pose) {
  const AxisLines lines = project_axes(K, pose);
  double sum = 0.0;
  for (int i = 0; i < kNumAxes; ++i)
    sum += std::acos(std::clamp(lines.dir[i].dot(obs.dir[i]), -1.0, 1.0));
  return sum;
}

Pose recover_pose(const AxisObservation& obs, const CameraIntrinsics& K, const LegRatios& ratios,
                  double scale_lambda_O, const RecoverOptions& opts) {
  ratios.validate();
  if (!(scale_lambda_O > 0.0)) throw Error(ErrorCode::InvalidArgument, "scale_lambda_O must be positive");
  const CornerImage corner = corner_from_observation(obs, opts.probe_px);
  const auto sols = solve_depth_scales(corner, K);
  const Vec3 rO = K.inverse() * corner.x_O;

  bool found = false;
  double best = std::numeric_limits<double>::infinity();
  Pose best_pose;
  for (const auto& s : sols) {
    Mat3 M;
    for (int i = 0; i < kNumAxes; ++i) M.col(i) = s.legs[i].normalized();
    if (!(M.determinant() > 0.0)) continue;
    Pose p;
    p.R = nearest_rotation(M);
    p.T = scale_lambda_O * rO;
    double res = std::numeric_limits<double>::infinity();
    try {
      res = axis_reprojection_residual(obs, K, p);
    } catch (const Error&) {
      // Candidate puts an axis on the viewing ray; keep it only as a last resort.
    }
    if (!found || res < best) {
      best = res;
      best_pose = p;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::AllCandidatesRejected, "every corner solution is left-handed");
  return best_pose;
}

}  // namespace axisforge
