#pragma once

#include <string_view>

namespace simtrans {

// Voice-transfer quality classes used to condition the model.
enum class ConditionLabel : int { kVeryBad = 0, kBad = 1, kNeutral = 2, kGood = 3, kVeryGood = 4 };
inline constexpr int kNumConditionLabels = 5;

std::string_view LabelName(ConditionLabel label);
// Throws std::invalid_argument on unknown names.
ConditionLabel ParseLabel(std::string_view name);

}  // namespace simtrans
