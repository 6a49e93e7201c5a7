#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesc/tensor.hpp"

namespace lesc {

constexpr double kAdaGradEpsilon = 1e-8;

// One AdaGrad update in place: accum += g^2; param -= lr * g / (sqrt(accum) + eps).
// Throws TrainingError naming `name` if any gradient entry is not finite.
void adagrad_update(std::span<double> params, std::span<const double> grads, std::span<double> accum, double lr,
                    std::string_view name, double eps = kAdaGradEpsilon);

// AdaGrad state for a set of named dense tensors plus embedding tables that
// receive row-sparse gradients. Rows that get no gradient are left alone,
// which is exactly what a dense AdaGrad step with a zero gradient does.
class AdaGrad {
 public:
  explicit AdaGrad(double learning_rate, double eps = kAdaGradEpsilon) : lr_(learning_rate), eps_(eps) {}

  std::size_t add_slot(std::string name, std::size_t size);
  std::size_t add_table(std::string name, std::size_t rows, std::size_t cols);

  void step(std::size_t slot, std::span<double> params, std::span<const double> grads);
  void step_rows(std::size_t table, RowMatrix& params, const SparseRows& grads);

  std::span<const double> accumulator(std::size_t slot) const { return slots_.at(slot).accum; }
  std::span<const double> table_accumulator(std::size_t table) const { return tables_.at(table).accum; }
  double learning_rate() const noexcept { return lr_; }

 private:
  struct Slot {
    std::string name;
    std::vector<double> accum;
  };
  struct Table {
    std::string name;
    std::size_t cols;
    std::vector<double> accum;
  };
  double lr_;
  double eps_;
  std::vector<Slot> slots_;
  std::vector<Table> tables_;
};

}  // namespace lesc
