#pragma once

#include <array>
#include <string_view>

namespace culcap {

// The six rubric dimensions, in reporting order.
enum class Dimension { kIr = 0, kCf, kSr, kRa, kHu, kCr };

inline constexpr std::size_t kNumDimensions = 6;
inline constexpr std::array<std::string_view, kNumDimensions> kDimensionKeys = {
    "ir", "cf", "sr", "ra", "hu", "cr"};
inline constexpr std::array<std::string_view, kNumDimensions> kDimensionLabels = {
    "IR", "CF", "SR", "Ra", "Hu", "Cr"};

struct DimensionScore {
  double ir = 0.0;
  double cf = 0.0;
  double sr = 0.0;
  double ra = 0.0;
  double hu = 0.0;
  double cr = 0.0;

  double& operator[](Dimension d);
  double operator[](Dimension d) const;
  double& operator[](std::size_t i) { return (*this)[static_cast<Dimension>(i)]; }
  double operator[](std::size_t i) const { return (*this)[static_cast<Dimension>(i)]; }

  // Unweighted mean of the six dimensions.
  double overall() const;
  bool in_range() const;
  bool operator==(const DimensionScore&) const = default;
};

// Four-level rubric. Bands are defined on integers; a fractional score
// belongs to the band containing its floor.
enum class RubricBand { kPoor, kWeak, kGood, kStrong };

RubricBand band_of(double score);
std::string_view band_range(RubricBand band);
std::string_view band_label(RubricBand band);

}  // namespace culcap
