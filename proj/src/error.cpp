#include "hxkit/error.hpp"

namespace hxkit {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingKey: return "MissingKey";
    case Errc::MalformedList: return "MalformedList";
    case Errc::ListLength: return "ListLength";
    case Errc::UnknownDataType: return "UnknownDataType";
    case Errc::Unsupported: return "Unsupported";
    case Errc::InvalidHeader: return "InvalidHeader";
    case Errc::Truncated: return "Truncated";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ZeroScale: return "ZeroScale";
    case Errc::DegenerateVariance: return "DegenerateVariance";
    case Errc::EmptySupport: return "EmptySupport";
    case Errc::NonPositiveInput: return "NonPositiveInput";
    case Errc::NoBandNear: return "NoBandNear";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::Io: return "Io";
  }
  return "Error";
}

}  // namespace hxkit
