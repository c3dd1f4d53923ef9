#include "polar/vad.h"

namespace polar {

char dimension_letter(Dimension dim) {
  switch (dim) {
    case Dimension::kValence: return 'V';
    case Dimension::kArousal: return 'A';
    case Dimension::kDominance: return 'D';
  }
  return '?';
}

std::optional<Dimension> parse_dimension(std::string_view text) {
  if (text == "V" || text == "v") return Dimension::kValence;
  if (text == "A" || text == "a") return Dimension::kArousal;
  if (text == "D" || text == "d") return Dimension::kDominance;
  return std::nullopt;
}

bool Vad::in_unit_cube() const {
  return in_unit_interval(v) && in_unit_interval(a) && in_unit_interval(d);
}

}  // namespace polar
