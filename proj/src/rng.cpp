#include "spag/rng.hpp"

namespace spag {

int Rng::uniform_int(int n) {
  if (n <= 1) return 0;
  double u = uniform() * n;
  int k = static_cast<int>(u);
  return k >= n ? n - 1 : k;
}

int Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w > 0.0 ? w : 0.0;
  if (total <= 0.0) return 0;
  double target = uniform() * total;
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
    double w = weights[i] > 0.0 ? weights[i] : 0.0;
    if (w > 0.0) last_positive = i;
    acc += w;
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace spag
