#ifndef HBR_REPERTOIRE_IO_HPP
#define HBR_REPERTOIRE_IO_HPP

#include <hbr/layers.hpp>

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

class RepertoireIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Repertoire text encoding:
//
//   # hbr-repertoire 1
//   # layer <id>
//   # descriptor_dim <d>
//   # lower <d values>
//   # upper <d values>
//   # normalize <0|1>
//   <layer_id>,<arity>,<genes...>,<descriptor...>,<fitness>,<curiosity>,<uncertainty>
//
// One record per member in member order; reals use %.17g so a write/read
// cycle is exact. The gene count of a record is its field count minus d+5.
// Member ids are reassigned 1..n by record order on read.

void write_repertoire(std::ostream& os, const Repertoire& rep);
void write_repertoire(const std::string& path, const Repertoire& rep);
Repertoire read_repertoire(std::istream& is);
Repertoire read_repertoire(const std::string& path);

/// Ordered repertoire files of one hierarchy plus the base robot they were
/// trained on. Paths are relative to the bundle file.
struct HierarchyBundle {
    std::string robot;
    std::vector<std::string> layers;
};

// Bundle encoding: `robot = <name>` then `layer = <file>` lines, lowest layer first.
void write_bundle(const std::string& path, const HierarchyBundle& bundle);
HierarchyBundle read_bundle(const std::string& path);

} // namespace hbr

#endif
