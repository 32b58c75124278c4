// Launches the motor from the localized-carrier initial state and prints the
// carrier velocity and its running average over the first 20 drive periods.

#include <cstdio>

#include "qmotor/dynamics.hpp"

int main() {
  using namespace qmotor;
  ModelParams p;
  p.L = 8;
  p.W = 0.2;
  p.A1 = 0.5;
  p.A2 = 0.25;
  p.omega = 0.1;
  p.Theta = pi / 2;

  const auto drive = make_drive(p);
  const auto res = propagate(initial_state(p, 1), drive, p.t0 + 20 * drive.period(), 80);

  std::printf("   t/T      v_c [v0]    running avg\n");
  for (int i = 0; i < res.trace.size(); i += 4)
    std::printf("%6.2f   %+.6f   %+.6f\n", res.trace.times[i] / drive.period(),
                res.trace.v_c[i], res.trace.running_avg[i]);
  return 0;
}
