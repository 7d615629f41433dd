#include "rfkg/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace rfkg {

void softmax_inplace(std::span<double> logits) {
  if (logits.empty()) return;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : logits) v /= total;
}

}  // namespace rfkg
