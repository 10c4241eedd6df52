#include "tbf/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tbf/errors.hpp"

namespace tbf {

void validate_dims(const Dims& dims) {
  if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
    std::ostringstream os;
    os << "invalid volume dims (" << dims.nx << ", " << dims.ny << ", " << dims.nz << "): every extent must be >= 1";
    throw DimensionError(os.str());
  }
}

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dims (" << a.nx << ", " << a.ny << ", " << a.nz << ") vs (" << b.nx << ", " << b.ny << ", "
       << b.nz << ")";
    throw ShapeMismatchError(os.str());
  }
}

void require_finite(const Volume& v, const char* what) {
  if (!v.all_finite()) {
    throw InvalidInputError(std::string(what) + ": volume contains NaN or Inf");
  }
}

Volume Volume::filled(Dims dims, double value) {
  validate_dims(dims);
  if (!std::isfinite(value)) throw InvalidInputError("fill value must be finite");
  return Volume(dims, std::vector<double>(dims.count(), value));
}

Volume Volume::from_data(Dims dims, std::vector<double> data) {
  validate_dims(dims);
  if (data.size() != dims.count()) {
    std::ostringstream os;
    os << "data length " << data.size() << " does not match dims (expected " << dims.count() << ")";
    throw ShapeMismatchError(os.str());
  }
  Volume v(dims, std::move(data));
  require_finite(v, "Volume::from_data");
  return v;
}

bool Volume::contains(const VoxelIndex& idx) const {
  return idx.ix >= 0 && idx.iy >= 0 && idx.iz >= 0 && idx.ix < dims_.nx && idx.iy < dims_.ny && idx.iz < dims_.nz;
}

std::size_t Volume::flat_index(const VoxelIndex& idx) const {
  if (!contains(idx)) {
    std::ostringstream os;
    os << "voxel index (" << idx.ix << ", " << idx.iy << ", " << idx.iz << ") outside dims (" << dims_.nx << ", "
       << dims_.ny << ", " << dims_.nz << ")";
    throw IndexError(os.str());
  }
  return static_cast<std::size_t>(idx.ix) +
         static_cast<std::size_t>(dims_.nx) *
             (static_cast<std::size_t>(idx.iy) + static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(idx.iz));
}

VoxelIndex Volume::unflatten(std::size_t flat) const {
  if (flat >= data_.size()) throw IndexError("flat index " + std::to_string(flat) + " out of range");
  const auto nx = static_cast<std::size_t>(dims_.nx);
  const auto ny = static_cast<std::size_t>(dims_.ny);
  return {static_cast<int>(flat % nx), static_cast<int>((flat / nx) % ny), static_cast<int>(flat / (nx * ny))};
}

bool Volume::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Volume::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Volume::max() const { return *std::max_element(data_.begin(), data_.end()); }

Box window_box(const Dims& dims, const VoxelIndex& c, const Radii& r) {
  return Box{{std::max(c.ix - r.rx, 0), std::max(c.iy - r.ry, 0), std::max(c.iz - r.rz, 0)},
             {std::min(c.ix + r.rx, dims.nx - 1), std::min(c.iy + r.ry, dims.ny - 1),
              std::min(c.iz + r.rz, dims.nz - 1)}};
}

WindowRange::iterator& WindowRange::iterator::operator++() {
  if (++cur_.ix > box_->hi.ix) {
    cur_.ix = box_->lo.ix;
    if (++cur_.iy > box_->hi.iy) {
      cur_.iy = box_->lo.iy;
      if (++cur_.iz > box_->hi.iz) done_ = true;
    }
  }
  return *this;
}

WindowRange clipped_window(const Dims& dims, const VoxelIndex& center, const Radii& radii) {
  validate_dims(dims);
  const bool inside = center.ix >= 0 && center.iy >= 0 && center.iz >= 0 && center.ix < dims.nx &&
                      center.iy < dims.ny && center.iz < dims.nz;
  if (!inside) throw IndexError("window center outside volume");
  if (radii.rx < 0 || radii.ry < 0 || radii.rz < 0) throw IndexError("window radii must be non-negative");
  return WindowRange(window_box(dims, center, radii));
}

}  // namespace tbf
