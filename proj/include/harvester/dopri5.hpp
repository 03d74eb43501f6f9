#pragma once

// Dormand-Prince 5(4) step with the standard 4th-order continuous extension.
// Coefficients follow Hairer, Norsett & Wanner, "Solving Ordinary
// Differential Equations I", and the DOPRI5 reference code.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace harvester {

template <typename Scalar, int N>
class DormandPrince {
 public:
  using Vector = Eigen::Matrix<Scalar, N, 1>;

  /// Result of one trial step. `error` is the RMS of the embedded error
  /// estimate scaled by atol + rtol * max(|y0|, |y1|); accept when <= 1.
  struct Step {
    Scalar t0 = 0;
    Scalar h = 0;
    Vector y0, y1;
    Vector k7;  // f(t0 + h, y1); first stage of the next step (FSAL)
    Scalar error = 0;
    Vector r1, r2, r3, r4, r5;  // dense-output coefficients

    /// State at t0 + theta h, theta in [0, 1].
    Vector at(Scalar theta) const {
      const Scalar eta = Scalar(1) - theta;
      return r1 + theta * (r2 + eta * (r3 + theta * (r4 + eta * r5)));
    }
    Scalar t1() const { return t0 + h; }
  };

  /// `f(t, y)` must return Vector. `k1` is f(t0, y0).
  template <typename Rhs>
  static Step step(Rhs&& f, Scalar t0, const Vector& y0, const Vector& k1, Scalar h,
                   Scalar rtol, const Vector& atol) {
    static constexpr Scalar a21 = 1.0 / 5.0;
    static constexpr Scalar a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr Scalar a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr Scalar a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr Scalar a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr Scalar a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                            a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
    static constexpr Scalar c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
    static constexpr Scalar e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    static constexpr Scalar d1 = -12715105075.0 / 11282082432.0,
                            d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0,
                            d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    Step s;
    s.t0 = t0;
    s.h = h;
    s.y0 = y0;
    const Vector k2 = f(t0 + c2 * h, Vector(y0 + h * a21 * k1));
    const Vector k3 = f(t0 + c3 * h, Vector(y0 + h * (a31 * k1 + a32 * k2)));
    const Vector k4 = f(t0 + c4 * h, Vector(y0 + h * (a41 * k1 + a42 * k2 + a43 * k3)));
    const Vector k5 =
        f(t0 + c5 * h, Vector(y0 + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
    const Vector k6 =
        f(t0 + h, Vector(y0 + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
    s.y1 = y0 + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    s.k7 = f(t0 + h, s.y1);

    const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * s.k7);
    const Vector scale =
        atol.array() + rtol * y0.array().abs().max(s.y1.array().abs());
    s.error = std::sqrt((err.array() / scale.array()).square().mean());

    s.r1 = y0;
    s.r2 = s.y1 - y0;
    s.r3 = h * k1 - s.r2;
    s.r4 = s.r2 - h * s.k7 - s.r3;
    s.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * s.k7);
    return s;
  }

  /// Step-size factor for the next attempt from a scaled error norm.
  static Scalar step_factor(Scalar error) {
    if (!(error > 0)) return Scalar(5);
    const Scalar fac = Scalar(0.9) * std::pow(error, Scalar(-0.2));
    return std::clamp(fac, Scalar(0.2), Scalar(5));
  }
};

}  // namespace harvester
