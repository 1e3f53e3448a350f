#include "orunet/losses.hpp"

namespace orunet::loss {

std::vector<double> ds_weights(int num_heads) {
  if (num_heads < 1) throw std::invalid_argument("ds_weights: num_heads must be >= 1");
  std::vector<double> w(static_cast<size_t>(num_heads));
  double sum = 0;
  for (int i = 0; i < num_heads; ++i) {
    w[i] = std::ldexp(1.0, -i);  // exact 2^-i
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace orunet::loss
