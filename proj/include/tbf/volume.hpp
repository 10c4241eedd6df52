#pragma once

#include <cstddef>
#include <iterator>
#include <span>
#include <vector>

namespace tbf {

struct Dims {
  int nx = 1;
  int ny = 1;
  int nz = 1;

  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  bool operator==(const Dims&) const = default;
};

struct VoxelIndex {
  int ix = 0;
  int iy = 0;
  int iz = 0;
  bool operator==(const VoxelIndex&) const = default;
};

// Half-widths of a neighbourhood window along x, y, z.
struct Radii {
  int rx = 0;
  int ry = 0;
  int rz = 0;
  bool operator==(const Radii&) const = default;
};

// Inclusive index bounds of a window after clipping to the volume.
struct Box {
  VoxelIndex lo;
  VoxelIndex hi;

  std::size_t count() const {
    return static_cast<std::size_t>(hi.ix - lo.ix + 1) * static_cast<std::size_t>(hi.iy - lo.iy + 1) *
           static_cast<std::size_t>(hi.iz - lo.iz + 1);
  }
  bool contains(const VoxelIndex& v) const {
    return v.ix >= lo.ix && v.ix <= hi.ix && v.iy >= lo.iy && v.iy <= hi.iy && v.iz >= lo.iz && v.iz <= hi.iz;
  }
};

/// Dense 3D grid of scalar intensities stored x-fastest:
/// flat = ix + nx * (iy + ny * iz). A 2D image is a volume with nz == 1.
///
/// Factory functions reject non-positive dims and non-finite data. The
/// mutable element accessors do not re-check finiteness; every filtering
/// entry point validates its input instead.
class Volume {
 public:
  static Volume filled(Dims dims, double value);
  static Volume from_data(Dims dims, std::vector<double> data);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  double operator[](std::size_t flat) const { return data_[flat]; }
  double& operator[](std::size_t flat) { return data_[flat]; }

  // Bounds-checked access.
  double at(const VoxelIndex& idx) const { return data_[flat_index(idx)]; }
  double& at(const VoxelIndex& idx) { return data_[flat_index(idx)]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  std::size_t flat_index(const VoxelIndex& idx) const;
  VoxelIndex unflatten(std::size_t flat) const;
  bool contains(const VoxelIndex& idx) const;

  bool all_finite() const;
  double min() const;
  double max() const;

  bool operator==(const Volume&) const = default;

 private:
  Volume(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {}

  Dims dims_;
  std::vector<double> data_;
};

// Throws DimensionError unless every extent is >= 1.
void validate_dims(const Dims& dims);

// Throws ShapeMismatchError naming `what` if the dims differ.
void require_same_dims(const Dims& a, const Dims& b, const char* what);

// Throws InvalidInputError naming `what` if any value is NaN/Inf.
void require_finite(const Volume& v, const char* what);

inline std::size_t flat_index(const Volume& v, const VoxelIndex& idx) { return v.flat_index(idx); }

Box window_box(const Dims& dims, const VoxelIndex& center, const Radii& radii);

/// Every in-bounds voxel whose offset from `center` is within `radii` on each
/// axis, in x-fastest order. Out-of-volume positions are skipped, so windows
/// at the border are smaller rather than padded.
class WindowRange {
 public:
  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = VoxelIndex;
    using difference_type = std::ptrdiff_t;
    using pointer = const VoxelIndex*;
    using reference = const VoxelIndex&;

    iterator() = default;
    iterator(const Box* box, VoxelIndex cur, bool done) : box_(box), cur_(cur), done_(done) {}

    reference operator*() const { return cur_; }
    pointer operator->() const { return &cur_; }
    iterator& operator++();
    iterator operator++(int) {
      iterator tmp = *this;
      ++*this;
      return tmp;
    }
    bool operator==(const iterator& o) const {
      return done_ == o.done_ && (done_ || cur_ == o.cur_);
    }

   private:
    const Box* box_ = nullptr;
    VoxelIndex cur_;
    bool done_ = true;
  };

  explicit WindowRange(Box box) : box_(box) {}

  iterator begin() const { return iterator(&box_, box_.lo, false); }
  iterator end() const { return iterator(&box_, box_.lo, true); }
  std::size_t size() const { return box_.count(); }
  const Box& box() const { return box_; }

 private:
  Box box_;
};

// Throws IndexError if `center` lies outside the volume or a radius is negative.
WindowRange clipped_window(const Dims& dims, const VoxelIndex& center, const Radii& radii);

}  // namespace tbf
