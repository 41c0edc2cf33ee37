#include "spamlab/error.hpp"
#include "spamlab/types.hpp"

namespace spamlab {

ParseError::ParseError(const std::string& what, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string_view to_string(Band b) { return b == Band::E1 ? "E1" : "E5B"; }

std::optional<Band> parse_band(std::string_view s) {
  if (s == "E1") return Band::E1;
  if (s == "E5B" || s == "E5b") return Band::E5B;
  return std::nullopt;
}

}  // namespace spamlab
