#include "mealsense/error.h"

namespace mealsense {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::MalformedStream: return "MalformedStream";
    case ErrorCode::UnsupportedRate: return "UnsupportedRate";
    case ErrorCode::EmptyWindowSet: return "EmptyWindowSet";
    case ErrorCode::InvalidSignal: return "InvalidSignal";
    case ErrorCode::LayoutError: return "LayoutError";
    case ErrorCode::DegenerateDataset: return "DegenerateDataset";
    case ErrorCode::InsufficientUsers: return "InsufficientUsers";
    case ErrorCode::UndefinedAttitude: return "UndefinedAttitude";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::NoMealContent: return "NoMealContent";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::NoKnowledge: return "NoKnowledge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace mealsense
