#pragma once

// Serialization: binary wave-function container, CSV exports and evolution-record directories.
//
// Binary container (all little-endian):
//   char[8]  magic "BOHMWF01"
//   u32      dimension
//   per axis: f64 lower, f64 spacing, u64 count, u32 boundary (0 periodic, 1 boxed), u32 reserved
//   f64      hbar
//   u32      mass count, u32 reserved, then f64 masses
//   u64      amplitude count, then interleaved f64 (re, im) in row-major grid order

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bohm/flux.hpp"
#include "bohm/guidance.hpp"
#include "bohm/propagate.hpp"
#include "json.hpp"

namespace bohm::io {

using nlohmann::json;

inline constexpr char kMagic[8] = {'B', 'O', 'H', 'M', 'W', 'F', '0', '1'};

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
  std::uint64_t bits;
  std::size_t nbytes;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
    nbytes = 8;
  } else {
    bits = static_cast<std::uint64_t>(v);
    nbytes = sizeof(T);
  }
  for (std::size_t b = 0; b < nbytes; ++b) out.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& buf) : buf_(buf) {}
  template <class T>
  T get() {
    const std::size_t nbytes = std::is_floating_point_v<T> ? 8 : sizeof(T);
    if (pos_ + nbytes > buf_.size()) throw Error("truncated wave-function file");
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < nbytes; ++b) bits |= static_cast<std::uint64_t>(buf_[pos_ + b]) << (8 * b);
    pos_ += nbytes;
    if constexpr (std::is_floating_point_v<T>)
      return std::bit_cast<double>(bits);
    else
      return static_cast<T>(bits);
  }
  void bytes(char* out, std::size_t n) {
    if (pos_ + n > buf_.size()) throw Error("truncated wave-function file");
    std::memcpy(out, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::vector<unsigned char>& buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode(const ScalarWaveFunction& psi, const PhysicalConstants& c) {
  std::vector<unsigned char> out(kMagic, kMagic + 8);
  const Grid& g = psi.grid();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(g.dimension()));
  for (const auto& a : g.axes()) {
    detail::put_le<double>(out, a.lower);
    detail::put_le<double>(out, a.spacing);
    detail::put_le<std::uint64_t>(out, a.count);
    detail::put_le<std::uint32_t>(out, a.boundary == Boundary::Periodic ? 0u : 1u);
    detail::put_le<std::uint32_t>(out, 0u);
  }
  detail::put_le<double>(out, c.hbar);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.masses.size()));
  detail::put_le<std::uint32_t>(out, 0u);
  for (double m : c.masses) detail::put_le<double>(out, m);
  detail::put_le<std::uint64_t>(out, psi.size());
  for (const auto& z : psi.amplitudes()) {
    detail::put_le<double>(out, z.real());
    detail::put_le<double>(out, z.imag());
  }
  return out;
}

struct Decoded {
  ScalarWaveFunction psi;
  PhysicalConstants constants;
};

inline Decoded decode(const std::vector<unsigned char>& buf) {
  detail::Reader r(buf);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw Error("not a wave-function file (bad magic)");
  const auto dim = r.get<std::uint32_t>();
  if (dim < 1 || dim > kMaxDimension) throw Error("unsupported dimension in wave-function file");
  std::vector<Axis> axes;
  for (std::uint32_t k = 0; k < dim; ++k) {
    Axis a;
    a.lower = r.get<double>();
    a.spacing = r.get<double>();
    a.count = r.get<std::uint64_t>();
    a.boundary = r.get<std::uint32_t>() == 0 ? Boundary::Periodic : Boundary::Boxed;
    r.get<std::uint32_t>();
    axes.push_back(a);
  }
  PhysicalConstants c;
  c.hbar = r.get<double>();
  const auto nm = r.get<std::uint32_t>();
  r.get<std::uint32_t>();
  c.masses.clear();
  for (std::uint32_t k = 0; k < nm; ++k) c.masses.push_back(r.get<double>());
  Grid g(std::move(axes));
  const auto n = r.get<std::uint64_t>();
  if (n != g.size()) throw Error("amplitude count does not match the grid header");
  ComplexField amps(n);
  for (auto& z : amps) {
    const double re = r.get<double>();
    const double im = r.get<double>();
    z = {re, im};
  }
  if (!r.done()) throw Error("trailing bytes in wave-function file");
  return {ScalarWaveFunction(std::move(g), std::move(amps)), std::move(c)};
}

inline void write_binary(const std::filesystem::path& path, const ScalarWaveFunction& psi, const PhysicalConstants& c) {
  const auto bytes = encode(psi, c);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Decoded read_binary(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(buf);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Columns: x[,y],re,im
inline void write_csv(std::ostream& os, const ScalarWaveFunction& psi) {
  const Grid& g = psi.grid();
  os << (g.dimension() == 1 ? "x,re,im\n" : "x,y,re,im\n");
  for (std::size_t p = 0; p < psi.size(); ++p) {
    os << fmt(g.coord(p, 0)) << ',';
    if (g.dimension() == 2) os << fmt(g.coord(p, 1)) << ',';
    os << fmt(psi[p].real()) << ',' << fmt(psi[p].imag()) << '\n';
  }
}

// Columns: t,q1[,q2]; the last row is "status,<status>".
inline void write_csv(std::ostream& os, const Trajectory& tr) {
  const std::size_t d = tr.samples.empty() ? 1 : tr.samples.front().dimension;
  os << (d == 1 ? "t,q1\n" : "t,q1,q2\n");
  for (const auto& s : tr.samples) {
    os << fmt(s.time) << ',' << fmt(s.q[0]);
    if (d == 2) os << ',' << fmt(s.q[1]);
    os << '\n';
  }
  os << "status," << to_string(tr.status) << '\n';
}

inline json to_json(const Grid& g) {
  json axes = json::array();
  for (const auto& a : g.axes())
    axes.push_back({{"lower", a.lower}, {"spacing", a.spacing}, {"count", a.count}, {"boundary", to_string(a.boundary)}});
  return {{"dimension", g.dimension()}, {"axes", axes}};
}

inline Grid grid_from_json(const json& j) {
  std::vector<Axis> axes;
  for (const auto& a : j.at("axes"))
    axes.push_back(Axis{a.at("lower").get<double>(), a.at("count").get<std::size_t>(), a.at("spacing").get<double>(),
                        a.at("boundary").get<std::string>() == "periodic" ? Boundary::Periodic : Boundary::Boxed});
  return Grid(std::move(axes));
}

inline json to_json(const PhysicalConstants& c) { return {{"hbar", c.hbar}, {"masses", c.masses}}; }

inline PhysicalConstants constants_from_json(const json& j) {
  return {j.at("hbar").get<double>(), j.at("masses").get<std::vector<double>>()};
}

inline json to_json(const Potential& v) {
  json j{{"type", potential_name(v)}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, potential::Harmonic>) j["omega"] = p.omega;
        if constexpr (std::is_same_v<T, potential::CoupledOscillator>) j["kappa"] = p.kappa;
        if constexpr (std::is_same_v<T, potential::SoftCoulomb>) j["softening"] = p.softening;
        if constexpr (std::is_same_v<T, potential::Sampled>) j["values"] = p.values;
      },
      v);
  return j;
}

inline Potential potential_from_json(const json& j) {
  const std::string t = j.at("type").get<std::string>();
  if (t == "free") return potential::Free{};
  if (t == "harmonic") return potential::Harmonic{j.at("omega").get<std::vector<double>>()};
  if (t == "coupled-oscillator") return potential::CoupledOscillator{j.at("kappa").get<double>()};
  if (t == "soft-coulomb") return potential::SoftCoulomb{j.at("softening").get<double>()};
  if (t == "sampled") return potential::Sampled{j.at("values").get<std::vector<double>>()};
  throw Error("unknown potential type '" + t + "'");
}

inline json to_json(const CrossingReport& r) {
  return {{"expected_total", r.expected_total},   {"expected_signed", r.expected_signed},
          {"empirical_total", r.empirical_total}, {"empirical_signed", r.empirical_signed},
          {"stderr_total", r.stderr_total},       {"stderr_signed", r.stderr_signed},
          {"n_members", r.n_members}};
}

// Directory layout: manifest.json + snapshot_NNNNN.bwf per stored time.
inline void save_record(const std::filesystem::path& dir, const EvolutionRecord& rec) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    std::ostringstream name;
    name << "snapshot_" << std::setw(5) << std::setfill('0') << k << ".bwf";
    write_binary(dir / name.str(), rec.snapshots[k], rec.constants);
    files.push_back(name.str());
  }
  const json manifest{{"grid", to_json(rec.grid)},         {"constants", to_json(rec.constants)},
                      {"potential", to_json(rec.potential)}, {"method", to_string(rec.method)},
                      {"dt", rec.dt},                         {"stride", rec.stride},
                      {"times", rec.times},                   {"snapshots", files}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

inline EvolutionRecord load_record(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw Error("missing manifest.json in " + dir.string());
  const json m = json::parse(f);
  EvolutionRecord rec;
  rec.grid = grid_from_json(m.at("grid"));
  rec.constants = constants_from_json(m.at("constants"));
  rec.potential = potential_from_json(m.at("potential"));
  const auto method = parse_method(m.at("method").get<std::string>());
  if (!method) throw Error("unknown propagator method in manifest");
  rec.method = *method;
  rec.dt = m.at("dt").get<double>();
  rec.stride = m.at("stride").get<std::size_t>();
  rec.times = m.at("times").get<std::vector<double>>();
  for (const auto& name : m.at("snapshots")) {
    auto d = read_binary(dir / name.get<std::string>());
    if (!(d.psi.grid() == rec.grid)) throw Error("snapshot grid does not match the manifest");
    rec.snapshots.push_back(std::move(d.psi));
  }
  if (rec.snapshots.size() != rec.times.size()) throw Error("snapshot count does not match the time list");
  return rec;
}

}  // namespace bohm::io
