#include "hwq/cutoff.hpp"

namespace hwq {

double psi(double t) { return cutoff_eval(t).v; }
double psi_d1(double t) { return cutoff_eval(t).d1; }
double psi_d2(double t) { return cutoff_eval(t).d2; }

}  // namespace hwq
