#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pathrec {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed set of flat parameter slots. Slot state is created on
/// first use; every step() call advances the shared bias-correction counter.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void begin_step() { ++t_; }
  void update(std::size_t slot, std::span<double> param, std::span<const double> grad);

  long steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return options_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace pathrec
