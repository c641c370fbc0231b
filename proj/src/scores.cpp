#include "culcap/scores.hpp"

#include <cmath>

#include "culcap/common.hpp"

namespace culcap {

double& DimensionScore::operator[](Dimension d) {
  switch (d) {
    case Dimension::kIr: return ir;
    case Dimension::kCf: return cf;
    case Dimension::kSr: return sr;
    case Dimension::kRa: return ra;
    case Dimension::kHu: return hu;
    case Dimension::kCr: return cr;
  }
  throw Error(ErrorCode::kInvalidArgument, "bad dimension");
}

double DimensionScore::operator[](Dimension d) const {
  return const_cast<DimensionScore&>(*this)[d];
}

double DimensionScore::overall() const {
  return (ir + cf + sr + ra + hu + cr) / 6.0;
}

bool DimensionScore::in_range() const {
  for (std::size_t i = 0; i < kNumDimensions; ++i) {
    const double v = (*this)[i];
    if (!(v >= 0.0 && v <= 10.0)) return false;
  }
  return true;
}

RubricBand band_of(double score) {
  if (!(score >= 0.0 && score <= 10.0)) {
    throw Error(ErrorCode::kRangeError,
                "score " + std::to_string(score) + " outside [0, 10]");
  }
  const double f = std::floor(score);
  if (f <= 2.0) return RubricBand::kPoor;
  if (f <= 5.0) return RubricBand::kWeak;
  if (f <= 7.0) return RubricBand::kGood;
  return RubricBand::kStrong;
}

std::string_view band_range(RubricBand band) {
  switch (band) {
    case RubricBand::kPoor: return "0-2";
    case RubricBand::kWeak: return "3-5";
    case RubricBand::kGood: return "6-7";
    case RubricBand::kStrong: return "8-10";
  }
  return "";
}

std::string_view band_label(RubricBand band) {
  switch (band) {
    case RubricBand::kPoor: return "extremely poor";
    case RubricBand::kWeak: return "relatively weak";
    case RubricBand::kGood: return "generally good";
    case RubricBand::kStrong: return "strong";
  }
  return "";
}

}  // namespace culcap
