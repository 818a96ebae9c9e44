#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "hxkit/header.hpp"

namespace hxkit {

/// Dense lines x samples x bands cube stored band-interleaved-by-pixel in
/// doubles. Pixel n = row * samples + col owns values[n*bands, (n+1)*bands).
class HyperCube {
 public:
  HyperCube() = default;

  /// The header's dims must match `values.size()`. The stored header always
  /// reports f64 / BIP / offset 0; interleave and type belong to files.
  HyperCube(HeaderInfo header, std::vector<double> values,
            std::optional<double> nodata = std::nullopt);

  /// Zero-filled cube whose header copies metadata from `like` but with the
  /// given dimensions. Spectral lists are kept only if `bands` matches.
  static HyperCube zeros_like(const HeaderInfo& like, std::size_t lines, std::size_t samples,
                              std::size_t bands);
  static HyperCube zeros(std::size_t lines, std::size_t samples, std::size_t bands);

  const HeaderInfo& header() const noexcept { return header_; }
  HeaderInfo& header() noexcept { return header_; }
  std::size_t lines() const noexcept { return header_.lines; }
  std::size_t samples() const noexcept { return header_.samples; }
  std::size_t bands() const noexcept { return header_.bands; }
  std::size_t pixel_count() const noexcept { return header_.lines * header_.samples; }

  const std::optional<double>& nodata() const noexcept { return nodata_; }
  void set_nodata(std::optional<double> value) { nodata_ = value; }

  std::span<const double> pixel(std::size_t row, std::size_t col) const {
    return {values_.data() + (row * samples() + col) * bands(), bands()};
  }
  std::span<double> pixel(std::size_t row, std::size_t col) {
    return {values_.data() + (row * samples() + col) * bands(), bands()};
  }
  std::span<const double> pixel(std::size_t index) const {
    return {values_.data() + index * bands(), bands()};
  }
  std::span<double> pixel(std::size_t index) {
    return {values_.data() + index * bands(), bands()};
  }

  double at(std::size_t row, std::size_t col, std::size_t band) const {
    return values_[(row * samples() + col) * bands() + band];
  }
  double& at(std::size_t row, std::size_t col, std::size_t band) {
    return values_[(row * samples() + col) * bands() + band];
  }

  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  /// bands x pixels column-major view over the storage.
  Eigen::Map<const Eigen::MatrixXd> matrix() const {
    return {values_.data(), static_cast<Eigen::Index>(bands()),
            static_cast<Eigen::Index>(pixel_count())};
  }
  Eigen::Map<Eigen::MatrixXd> matrix() {
    return {values_.data(), static_cast<Eigen::Index>(bands()),
            static_cast<Eigen::Index>(pixel_count())};
  }

  bool is_nodata_value(double v) const noexcept { return nodata_ && v == *nodata_; }

  /// A pixel is valid when none of its bands carries the nodata value.
  bool pixel_valid(std::size_t index) const noexcept;

  /// Linear indices of valid pixels, ascending.
  std::vector<std::size_t> valid_pixels() const;

  /// Copy of the valid pixels as a bands x n matrix, column order = valid_pixels().
  Eigen::MatrixXd valid_matrix() const;

  bool operator==(const HyperCube& other) const;

 private:
  HeaderInfo header_;
  std::vector<double> values_;
  std::optional<double> nodata_;
};

/// Default nodata written by derived single-band products (ratio maps etc.)
/// when the source cube carries none.
inline constexpr double kDefaultNodata = -9999.0;

/// Single-band cube with the spatial shape and map info of `like`.
HyperCube single_band_like(const HyperCube& like, std::vector<double> values,
                           std::optional<double> nodata);

}  // namespace hxkit
