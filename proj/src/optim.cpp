#include "lesc/optim.hpp"

#include <cmath>

#include "lesc/error.hpp"

namespace lesc {

void adagrad_update(std::span<double> params, std::span<const double> grads, std::span<double> accum, double lr,
                    std::string_view name, double eps) {
  if (params.size() != grads.size() || params.size() != accum.size()) {
    throw DimensionError("adagrad_update: size mismatch for " + std::string(name));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter " + std::string(name));
    accum[i] += g * g;
    params[i] -= lr * g / (std::sqrt(accum[i]) + eps);
  }
}

std::size_t AdaGrad::add_slot(std::string name, std::size_t size) {
  slots_.push_back({std::move(name), std::vector<double>(size, 0.0)});
  return slots_.size() - 1;
}

std::size_t AdaGrad::add_table(std::string name, std::size_t rows, std::size_t cols) {
  tables_.push_back({std::move(name), cols, std::vector<double>(rows * cols, 0.0)});
  return tables_.size() - 1;
}

void AdaGrad::step(std::size_t slot, std::span<double> params, std::span<const double> grads) {
  Slot& s = slots_.at(slot);
  adagrad_update(params, grads, s.accum, lr_, s.name, eps_);
}

void AdaGrad::step_rows(std::size_t table, RowMatrix& params, const SparseRows& grads) {
  Table& t = tables_.at(table);
  if (static_cast<std::size_t>(params.cols()) != t.cols) throw DimensionError("step_rows: width mismatch for " + t.name);
  for (const auto& [row, g] : grads) {
    if (static_cast<Eigen::Index>(row) >= params.rows()) throw DimensionError("step_rows: row out of range for " + t.name);
    std::span<double> p{params.row(row).data(), t.cols};
    std::span<double> acc{t.accum.data() + static_cast<std::size_t>(row) * t.cols, t.cols};
    adagrad_update(p, {g.data(), t.cols}, acc, lr_, t.name, eps_);
  }
}

}  // namespace lesc
