#ifndef POLAR_VAD_H_
#define POLAR_VAD_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace polar {

enum class Dimension { kValence = 0, kArousal = 1, kDominance = 2 };

inline constexpr std::array<Dimension, 3> kAllDimensions = {
    Dimension::kValence, Dimension::kArousal, Dimension::kDominance};

// "V", "A" or "D".
char dimension_letter(Dimension dim);
std::optional<Dimension> parse_dimension(std::string_view text);

// A Valence/Arousal/Dominance triple; every component lies in [0, 1].
struct Vad {
  double v = 0.0;
  double a = 0.0;
  double d = 0.0;

  double operator[](Dimension dim) const {
    switch (dim) {
      case Dimension::kValence: return v;
      case Dimension::kArousal: return a;
      case Dimension::kDominance: return d;
    }
    return v;
  }
  double &operator[](Dimension dim) {
    switch (dim) {
      case Dimension::kValence: return v;
      case Dimension::kArousal: return a;
      case Dimension::kDominance: return d;
    }
    return v;
  }

  bool in_unit_cube() const;
  friend bool operator==(const Vad &, const Vad &) = default;
};

inline bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace polar

#endif  // POLAR_VAD_H_
