#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>

#include <Eigen/Dense>

namespace lesc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Row-major storage so a table row is one contiguous embedding.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Gradient rows for an embedding table, keyed by row index.
using SparseRows = std::unordered_map<std::uint32_t, Vector>;

inline std::span<double> as_span(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> as_span(RowMatrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Adds g into rows[row], creating a zero row of g's size on first touch.
inline void accumulate_row(SparseRows& rows, std::uint32_t row, const Eigen::Ref<const Vector>& g) {
  auto [it, inserted] = rows.try_emplace(row, g);
  if (!inserted) it->second += g;
}

}  // namespace lesc
