// Model-based tracking controller, error dynamics and the Lyapunov certificate.
//
// The controller cancels the predicted load torque and places the tracking
// error dynamics at e' = A e + B_in (T - T_hat) with A the companion matrix of
// (lambda1, lambda2) and B_in = -J^{-1} b: an unpredicted load decelerates the
// rotor. P solves A^T P + P A + Q = 0; some texts call this the continuous
// algebraic Riccati equation, but for fixed A it is linear in P.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/LU>

#include "pmsm_gp/dynamics.hpp"

namespace pmsm_gp {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

class NotHurwitzError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Gains {
  double lambda1 = -5e3;
  double lambda2 = -1e4;
};

inline bool is_hurwitz(const Mat2& A) { return A.trace() < 0.0 && A.determinant() > 0.0; }

inline Mat2 build_A(const Gains& g) {
  Mat2 A;
  A << 0.0, 1.0, g.lambda1, g.lambda2;
  if (!is_hurwitz(A)) {
    throw NotHurwitzError("gains (" + std::to_string(g.lambda1) + ", " +
                          std::to_string(g.lambda2) + ") do not give a Hurwitz error matrix");
  }
  return A;
}

inline bool is_positive_definite(const Mat2& M) {
  return M(0, 0) > 0.0 && M.determinant() > 0.0 && std::abs(M(0, 1) - M(1, 0)) <= 1e-12 * M.norm();
}

/// Solves A^T P + P A + Q = 0 for symmetric P via the 3-unknown system in
/// (p11, p12, p22).
inline Mat2 solve_lyapunov(const Mat2& A, const Mat2& Q) {
  if (!is_hurwitz(A)) throw NotHurwitzError("solve_lyapunov: A is not Hurwitz");
  if (!is_positive_definite(Q))
    throw std::invalid_argument("solve_lyapunov: Q must be symmetric positive definite");
  const double a11 = A(0, 0), a12 = A(0, 1), a21 = A(1, 0), a22 = A(1, 1);
  Eigen::Matrix3d M;
  M << 2.0 * a11, 2.0 * a21, 0.0,
       a12, a11 + a22, a21,
       0.0, 2.0 * a12, 2.0 * a22;
  const Eigen::Vector3d rhs(-Q(0, 0), -0.5 * (Q(0, 1) + Q(1, 0)), -Q(1, 1));
  const Eigen::Vector3d sol = M.fullPivLu().solve(rhs);
  Mat2 P;
  P << sol[0], sol[1], sol[1], sol[2];
  if (!is_positive_definite(P))
    throw std::runtime_error("solve_lyapunov: solution is not positive definite");
  return P;
}

inline double lyapunov_residual(const Mat2& A, const Mat2& P, const Mat2& Q) {
  return (A.transpose() * P + P * A + Q).norm();
}

struct ClosedLoopMatrices {
  Mat2 A;
  Vec2 b{0.0, 1.0};
  Vec2 B_in;  // input of the prediction error T - T_hat, -b / J
  Mat2 Q;
  Mat2 P;

  static ClosedLoopMatrices make(const Gains& gains, const Mat2& Q, const MotorParams& params) {
    ClosedLoopMatrices m;
    m.A = build_A(gains);
    m.B_in = -m.b / params.J;
    m.Q = Q;
    m.P = solve_lyapunov(m.A, Q);
    return m;
  }

  double residual() const { return lyapunov_residual(A, P, Q); }
};

struct TrackingError {
  Vec2 e = Vec2::Zero();

  double norm() const { return e.norm(); }
};

inline TrackingError tracking_error(const State& s, const ReferencePoint& ref) {
  return {Vec2(s.phi - ref.phi_d, s.omega - ref.omega_d)};
}

/// q-axis current command compensating the predicted torque `T_hat`.
inline double control_law(const State& s, const ReferencePoint& ref, double T_hat,
                          const MotorParams& params, const Gains& gains) {
  const double J = params.J;
  return 2.0 / (3.0 * params.p * params.psi) *
         (T_hat + J * gains.lambda1 * (s.phi - ref.phi_d) + J * gains.lambda2 * (s.omega - ref.omega_d) +
          params.B_damp * s.omega + J * ref.accel_d);
}

}  // namespace pmsm_gp
