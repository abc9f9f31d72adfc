#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "phalanx/errors.hpp"
#include "phalanx/types.hpp"

namespace phalanx {

// Binary minutiae record layout (all integers big-endian):
//
//   offset size  field
//   0      4     magic "FMR\0"
//   4      4     version " 20\0"
//   8      4     total record length in bytes
//   12     2     capture equipment id
//   14     2     image width  (px)
//   16     2     image height (px)
//   18     2     x resolution (px/cm)
//   20     2     y resolution (px/cm)
//   22     1     view count (always 1 here)
//   23     1     reserved (0)
//   24     1     finger position
//   25     1     view number (high nibble, 0) | impression number (low nibble)
//   26     1     finger quality byte; carries the 1..5 capture quality grade
//   27     1     minutia count N
//   28     6*N   minutiae, each:
//                  2B  type (2 bits) << 14 | x (14 bits)
//                  2B  reserved (2 bits, 0) << 14 | y (14 bits)
//                  1B  angle, 256 units per full turn
//                  1B  quality 0..100
//   28+6N  2     extended data length L (payload skipped on parse)
//
// Total length = 30 + 6*N + L.

// Details the parser wants to surface without failing the parse.
struct ParseNotes {
    bool skipped_extended_data = false;
    std::uint16_t extended_data_length = 0;
    // Quality byte held a plausible 0..100 score instead of a 1..5 grade;
    // nfiq was defaulted to 3.
    bool quality_byte_not_a_grade = false;
};

// Throws CodecError (bad_magic / truncated / length_mismatch /
// field_out_of_range) with the byte offset of the offending field.
MinutiaTemplate parse_template(std::span<const std::uint8_t> bytes,
                               ParseNotes* notes = nullptr);

// Throws CodecError(invariant_violation) if the template cannot be expressed
// in the layout above (coordinates outside the image or past 14 bits, more
// than 255 minutiae, bad impression number, quality out of range).
std::vector<std::uint8_t> serialize_template(const MinutiaTemplate& tpl);

MinutiaTemplate read_template_file(const std::filesystem::path& path,
                                   ParseNotes* notes = nullptr);
void write_template_file(const std::filesystem::path& path, const MinutiaTemplate& tpl);

}  // namespace phalanx
