#pragma once

namespace hwq {

// C² cutoff: constant -1/2 below -1, identity above 0, quartic blend in between.
struct CutoffValue {
  double v, d1, d2;
};

inline CutoffValue cutoff_eval(double t) {
  if (t <= -1.0) return {-0.5, 0.0, 0.0};
  if (t >= 0.0) return {t, 1.0, 0.0};
  const double s = t + 1.0;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double s4 = s2 * s2;
  return {s3 - 0.5 * s4 - 0.5, 3.0 * s2 - 2.0 * s3, 6.0 * s - 6.0 * s2};
}

double psi(double t);
double psi_d1(double t);
double psi_d2(double t);

}  // namespace hwq
