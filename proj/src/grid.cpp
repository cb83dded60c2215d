#include "hc3l/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace hc3l {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

namespace {

void validate_shape(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("grid shape must be nonempty");
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("grid dimensions must be >= 1");
    }
}

}  // namespace

Grid::Grid(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_product(shape_), 0.0);
}

Grid::Grid(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("grid data length does not match shape product");
    }
}

Grid Grid::full(std::vector<std::size_t> shape, double value) {
    Grid g(std::move(shape));
    g.fill(value);
    return g;
}

bool Grid::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Grid::fill(double value) {
    for (double& v : data_) v = value;
}

}  // namespace hc3l
