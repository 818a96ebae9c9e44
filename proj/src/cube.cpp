#include "hxkit/cube.hpp"

#include <cstring>

#include "hxkit/error.hpp"

namespace hxkit {

HyperCube::HyperCube(HeaderInfo header, std::vector<double> values, std::optional<double> nodata)
    : header_(std::move(header)), values_(std::move(values)), nodata_(nodata) {
  header_.validate();
  if (values_.size() != header_.element_count()) {
    throw Error(Errc::InvalidArgument, "value count " + std::to_string(values_.size()) +
                                           " does not match header dimensions");
  }
  header_.data_type = DataType::f64;
  header_.interleave = Interleave::bip;
  header_.byte_order = ByteOrder::little;
  header_.header_offset = 0;
}

HyperCube HyperCube::zeros(std::size_t lines, std::size_t samples, std::size_t bands) {
  HeaderInfo h;
  h.lines = lines;
  h.samples = samples;
  h.bands = bands;
  return HyperCube(std::move(h), std::vector<double>(lines * samples * bands, 0.0));
}

HyperCube HyperCube::zeros_like(const HeaderInfo& like, std::size_t lines, std::size_t samples,
                                std::size_t bands) {
  HeaderInfo h = like;
  h.lines = lines;
  h.samples = samples;
  if (bands != like.bands) {
    h.wavelengths.reset();
    h.fwhm.reset();
    h.bbl.reset();
    h.band_names.reset();
  }
  h.bands = bands;
  return HyperCube(std::move(h), std::vector<double>(lines * samples * bands, 0.0));
}

bool HyperCube::pixel_valid(std::size_t index) const noexcept {
  if (!nodata_) return true;
  const double* p = values_.data() + index * bands();
  for (std::size_t b = 0; b < bands(); ++b) {
    if (p[b] == *nodata_) return false;
  }
  return true;
}

std::vector<std::size_t> HyperCube::valid_pixels() const {
  std::vector<std::size_t> out;
  out.reserve(pixel_count());
  for (std::size_t i = 0; i < pixel_count(); ++i) {
    if (pixel_valid(i)) out.push_back(i);
  }
  return out;
}

Eigen::MatrixXd HyperCube::valid_matrix() const {
  if (!nodata_) return matrix();
  const auto idx = valid_pixels();
  Eigen::MatrixXd out(bands(), static_cast<Eigen::Index>(idx.size()));
  const auto m = matrix();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
  }
  return out;
}

bool HyperCube::operator==(const HyperCube& other) const {
  if (!(header_ == other.header_)) return false;
  if (nodata_.has_value() != other.nodata_.has_value()) return false;
  if (nodata_ && std::memcmp(&*nodata_, &*other.nodata_, sizeof(double)) != 0) return false;
  return values_.size() == other.values_.size() &&
         std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0;
}

HyperCube single_band_like(const HyperCube& like, std::vector<double> values,
                           std::optional<double> nodata) {
  HyperCube out = HyperCube::zeros_like(like.header(), like.lines(), like.samples(), 1);
  out.values() = std::move(values);
  out.set_nodata(nodata);
  return out;
}

}  // namespace hxkit
