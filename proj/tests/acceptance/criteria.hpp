#pragma once

#include <chrono>
#include <string>

namespace mtf::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome gradient_correctness();      // 1
Outcome oracle_equivalence();        // 2
Outcome extrapolation_error();       // 3
Outcome action_concentration();      // 4
Outcome policy_improvement();        // 5
Outcome exploration_ablation();      // 6
Outcome ope_fidelity();              // 7
Outcome sensitivity_sweeps();        // 8
Outcome cli_determinism();           // 9

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double value, int precision = 4);

}  // namespace mtf::acceptance
