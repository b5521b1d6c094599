#include "khess/snapshot.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace khess {

namespace {

constexpr const char* kMagic = "khess-grid";
constexpr int kVersion = 1;

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_real(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw ConfigError("snapshot: bad real '" + s + "'");
  return v;
}

NodeClass parse_class(const std::string& s) {
  if (s == "interior") return NodeClass::Interior;
  if (s == "outer") return NodeClass::OuterBoundary;
  if (s == "inner") return NodeClass::InnerBoundary;
  if (s == "exterior") return NodeClass::Exterior;
  throw ConfigError("snapshot: unknown node class '" + s + "'");
}

std::string expect_key(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("snapshot: missing header key '" + key + "'");
  const auto sp = line.find(' ');
  if (sp == std::string::npos || line.substr(0, sp) != key)
    throw ConfigError("snapshot: expected key '" + key + "', got '" + line + "'");
  return line.substr(sp + 1);
}

}  // namespace

void write_snapshot(std::ostream& out, const Snapshot& snap) {
  const SnapshotHeader& h = snap.header;
  const BarrierConstants& c = h.constants;
  out << kMagic << ' ' << kVersion << '\n';
  out << "n " << h.n << '\n' << "k " << h.k << '\n';
  out << "epsilon " << hex(h.epsilon) << '\n';
  out << "r " << hex(h.r) << '\n' << "h " << hex(h.h) << '\n';
  out << "regime " << h.regime << '\n' << "preset " << h.preset << '\n';
  out << "constants " << hex(c.t0) << ' ' << hex(c.mu0) << ' ' << hex(c.K0) << ' ' << hex(c.M0) << ' ' << hex(c.a0)
      << ' ' << hex(c.delta) << ' ' << hex(c.eps0) << ' ' << hex(c.eps1) << '\n';
  out << "nodes " << snap.records.size() << '\n';
  for (const SnapshotRecord& rec : snap.records) {
    out << rec.index << ' ' << to_string(rec.cls);
    for (int a = 0; a < h.n; ++a) out << ' ' << hex(rec.x[a]);
    out << ' ' << hex(rec.value) << '\n';
  }
}

Snapshot read_snapshot(std::istream& in) {
  Snapshot s;
  std::string line;
  if (!std::getline(in, line) || line != std::string(kMagic) + " " + std::to_string(kVersion))
    throw ConfigError("snapshot: not a khess-grid version " + std::to_string(kVersion) + " file");
  SnapshotHeader& h = s.header;
  h.n = std::stoi(expect_key(in, "n"));
  h.k = std::stoi(expect_key(in, "k"));
  if (h.n < 1 || h.n > 3) throw ConfigError("snapshot: dimension out of range");
  h.epsilon = parse_real(expect_key(in, "epsilon"));
  h.r = parse_real(expect_key(in, "r"));
  h.h = parse_real(expect_key(in, "h"));
  h.regime = expect_key(in, "regime");
  h.preset = expect_key(in, "preset");
  {
    std::istringstream cs(expect_key(in, "constants"));
    BarrierConstants& c = h.constants;
    for (double* f : {&c.t0, &c.mu0, &c.K0, &c.M0, &c.a0, &c.delta, &c.eps0, &c.eps1}) {
      std::string tok;
      if (!(cs >> tok)) throw ConfigError("snapshot: short constants line");
      *f = parse_real(tok);
    }
  }
  const long long count = std::stoll(expect_key(in, "nodes"));
  if (count < 0) throw ConfigError("snapshot: negative node count");
  s.records.reserve(static_cast<size_t>(count));
  for (long long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ConfigError("snapshot: truncated at record " + std::to_string(i));
    std::istringstream ls(line);
    SnapshotRecord rec;
    std::string cls, tok;
    if (!(ls >> rec.index >> cls)) throw ConfigError("snapshot: bad record " + std::to_string(i));
    rec.cls = parse_class(cls);
    for (int a = 0; a < h.n; ++a) {
      if (!(ls >> tok)) throw ConfigError("snapshot: short record " + std::to_string(i));
      rec.x[a] = parse_real(tok);
    }
    if (!(ls >> tok)) throw ConfigError("snapshot: short record " + std::to_string(i));
    rec.value = parse_real(tok);
    if (ls >> tok) throw ConfigError("snapshot: trailing data in record " + std::to_string(i));
    s.records.push_back(rec);
  }
  return s;
}

void save_snapshot(const std::string& path, const Snapshot& snap) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("snapshot: cannot write " + path);
  write_snapshot(out, snap);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot read " + path);
  return read_snapshot(in);
}

Snapshot make_snapshot(const SnapshotHeader& header, const GridFunction& u) {
  Snapshot s;
  s.header = header;
  const AnnularGrid& g = *u.grid;
  for (std::int64_t i = 0; i < g.size(); ++i) {
    const Node& nd = g.node(i);
    if (nd.cls == NodeClass::Exterior) continue;
    s.records.push_back({i, nd.cls, nd.x, u[i]});
  }
  return s;
}

GridFunction restore(const Snapshot& snap, const GridPtr& grid) {
  GridFunction u(grid);
  for (const SnapshotRecord& rec : snap.records) {
    if (rec.index < 0 || rec.index >= grid->size()) throw ConfigError("snapshot: node index out of range");
    const Node& nd = grid->node(rec.index);
    if (nd.cls != rec.cls) throw ConfigError("snapshot: node class mismatch at " + std::to_string(rec.index));
    for (int a = 0; a < grid->dim(); ++a)
      if (nd.x[a] != rec.x[a]) throw ConfigError("snapshot: coordinate mismatch at " + std::to_string(rec.index));
    u[rec.index] = rec.value;
  }
  return u;
}

}  // namespace khess
