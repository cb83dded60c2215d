#pragma once

#include <cstddef>
#include <vector>

namespace hc3l {

// Dense N-dimensional row-major array of doubles with shape metadata.
// Carries images (HU or normalized intensity), latents, dose fields and
// network parameters; element semantics are contextual.
class Grid {
public:
    Grid() = default;

    // Zero-filled grid. Throws std::invalid_argument on an empty shape or a
    // zero dimension.
    explicit Grid(std::vector<std::size_t> shape);

    Grid(std::vector<std::size_t> shape, std::vector<double> data);

    static Grid full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 2D/3D accessors, row-major.
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    bool same_shape(const Grid& other) const noexcept { return shape_ == other.shape_; }
    bool all_finite() const noexcept;

    void fill(double value);

    bool operator==(const Grid& other) const noexcept {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace hc3l
