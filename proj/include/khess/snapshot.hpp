#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "khess/barriers.hpp"
#include "khess/grid.hpp"

namespace khess {

struct SnapshotHeader {
  int n = 0;
  int k = 0;
  double epsilon = 0.0;
  double r = 0.0;
  double h = 0.0;
  std::string regime;
  std::string preset;
  BarrierConstants constants;
};

struct SnapshotRecord {
  std::int64_t index = 0;
  NodeClass cls = NodeClass::Interior;
  Point x{};
  double value = 0.0;
};

struct Snapshot {
  SnapshotHeader header;
  std::vector<SnapshotRecord> records;
};

/// Text format: a "khess-grid 1" magic line, `key value` header lines, a
/// `nodes N` line, then one record per non-exterior node. Reals are written
/// as hexadecimal floats so reading reproduces every bit.
void write_snapshot(std::ostream& out, const Snapshot& snap);
Snapshot read_snapshot(std::istream& in);

void save_snapshot(const std::string& path, const Snapshot& snap);
Snapshot load_snapshot(const std::string& path);

Snapshot make_snapshot(const SnapshotHeader& header, const GridFunction& u);

/// Values of the snapshot placed on `grid`; throws ConfigError when node
/// indices, classes or coordinates disagree.
GridFunction restore(const Snapshot& snap, const GridPtr& grid);

}  // namespace khess
