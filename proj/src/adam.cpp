#include "pathrec/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace pathrec {

void Adam::update(std::size_t slot, std::span<double> param, std::span<const double> grad) {
  if (param.size() != grad.size()) throw std::invalid_argument("adam: size mismatch");
  if (slot >= m_.size()) {
    m_.resize(slot + 1);
    v_.resize(slot + 1);
  }
  auto& m = m_[slot];
  auto& v = v_[slot];
  if (m.empty()) {
    m.assign(param.size(), 0.0);
    v.assign(param.size(), 0.0);
  }
  if (m.size() != param.size()) throw std::invalid_argument("adam: slot changed size");

  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double step = options_.lr / c1;
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
    v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
    param[i] -= step * m[i] / (std::sqrt(v[i] / c2) + options_.eps);
  }
}

}  // namespace pathrec
