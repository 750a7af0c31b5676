#include "pvc/token_grid.hpp"

#include <string>

#include "pvc/error.hpp"

namespace pvc {

TokenGrid::TokenGrid(std::size_t rows, std::size_t cols, Matrix values)
    : h(rows), w(cols), tokens(std::move(values)) {
  if (tokens.rows() != rows * cols) {
    throw ValidationError("TokenGrid: " + std::to_string(tokens.rows()) + " tokens for a " +
                          std::to_string(rows) + "x" + std::to_string(cols) + " grid");
  }
}

}  // namespace pvc
