#pragma once

// Binary field snapshots. All integers are uint32 and all values IEEE doubles,
// little-endian.
//
//   field:   "HFLD" version n N rank p q components cols
//            then per component, per grid point (row-major grid order, last
//            axis fastest), the rank x cols matrix in row-major order as
//            (re, im) pairs.
//   bundle:  "HSEC" version count, then count x (name_length name field).

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "higgsflow/kahler_grid.hpp"

namespace higgsflow {

inline constexpr unsigned kSnapshotVersion = 1;

void write_field(std::ostream& os, const FormField& f);
FormField read_field(std::istream& is);

using NamedField = std::pair<std::string, FormField>;
void write_sections(std::ostream& os, const std::vector<NamedField>& sections);
std::vector<NamedField> read_sections(std::istream& is);

}  // namespace higgsflow
