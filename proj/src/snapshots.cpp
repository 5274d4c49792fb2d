#include "qg2rom/snapshots.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/io.hpp"

namespace qg2rom {

namespace {

constexpr char kMagic[8] = {'Q', 'G', 'S', 'N', 'A', 'P', '0', '1'};
constexpr std::size_t kHeaderBytes = 8 + 4 * 8;

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

void put_f64(std::vector<unsigned char>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::span<const unsigned char> in, std::size_t off) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= std::uint64_t{in[off + b]} << (8 * b);
  return v;
}

double get_f64(std::span<const unsigned char> in, std::size_t off) {
  return std::bit_cast<double>(get_u64(in, off));
}

// n * 8 bytes, or nothing if that overflows.
bool byte_count(std::uint64_t n, std::uint64_t& bytes) {
  if (n > std::numeric_limits<std::uint64_t>::max() / 8) return false;
  bytes = n * 8;
  return true;
}

nlohmann::json physics_json(const PhysParams& p) {
  return {{"Ro", p.Ro}, {"Re", p.Re}, {"Fr", p.Fr}, {"sigma", p.sigma}, {"delta", p.delta}};
}

PhysParams physics_from_json(const nlohmann::json& j) {
  PhysParams p;
  p.Ro = j.at("Ro").get<double>();
  p.Re = j.at("Re").get<double>();
  p.Fr = j.at("Fr").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.delta = j.at("delta").get<double>();
  return p;
}

}  // namespace

std::string_view to_string(FieldId id) {
  switch (id) {
    case FieldId::q1: return "q1";
    case FieldId::q2: return "q2";
    case FieldId::psi1: return "psi1";
    case FieldId::psi2: return "psi2";
  }
  return "?";
}

FieldId field_from_string(std::string_view name) {
  for (FieldId id : kAllFields) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("unknown field id '" + std::string(name) + "'");
}

const Field& field_of(const State& s, FieldId id) {
  switch (id) {
    case FieldId::q1: return s.q1;
    case FieldId::q2: return s.q2;
    case FieldId::psi1: return s.psi1;
    case FieldId::psi2: return s.psi2;
  }
  throw UsageError("field_of: bad field id");
}

Field SnapshotSet::column_field(std::size_t c) const {
  auto col = data.col(c);
  return Field(Grid(grid), std::vector<double>(col.begin(), col.end()));
}

void SnapshotSet::validate() const {
  const Grid g(grid);
  if (!data.empty() && n_h() != g.size()) {
    throw DomainError("snapshot set: " + std::to_string(n_h()) + " rows for a grid of " +
                      std::to_string(g.size()) + " cells");
  }
  if (n_s() != n_t() * n_d()) {
    throw DomainError("snapshot set: " + std::to_string(n_s()) + " columns, expected " +
                      std::to_string(n_t()) + " times x " + std::to_string(n_d()) + " blocks");
  }
  for (std::size_t p = 1; p < times.size(); ++p) {
    if (!(times[p] > times[p - 1])) throw DomainError("snapshot set: times not strictly increasing");
  }
  for (const auto& mu : params) {
    if (mu.size() != param_dim()) throw DomainError("snapshot set: parameter vectors differ in length");
  }
  for (double v : data.data()) {
    if (!std::isfinite(v)) throw DomainError("snapshot set: non-finite value");
  }
}

TimeAverage time_average(const SnapshotSet& set, std::size_t param_index) {
  if (set.n_t() == 0 || set.n_s() == 0) throw DomainError("time_average: empty snapshot set");
  if (param_index >= set.n_d()) {
    throw DomainError("time_average: parameter index " + std::to_string(param_index) +
                      " out of range");
  }
  const Grid g(set.grid);
  if (set.n_h() != g.size()) throw DomainError("time_average: set rows do not match its grid");
  std::vector<double> mean(set.n_h(), 0.0);
  const std::size_t first = param_index * set.n_t();
  for (std::size_t p = 0; p < set.n_t(); ++p) {
    auto col = set.data.col(first + p);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += col[k];
  }
  const double inv = 1.0 / static_cast<double>(set.n_t());
  for (double& v : mean) v *= inv;
  TimeAverage out{set.field, set.params.empty() ? std::vector<double>{} : set.params[param_index],
                  Field(g, std::move(mean))};
  return out;
}

std::vector<TimeAverage> time_averages(const SnapshotSet& set) {
  std::vector<TimeAverage> out;
  for (std::size_t d = 0; d < set.n_d(); ++d) out.push_back(time_average(set, d));
  return out;
}

Matrix fluctuations(const SnapshotSet& set, const std::vector<TimeAverage>& means) {
  if (means.size() != set.n_d()) {
    throw DomainError("fluctuations: " + std::to_string(means.size()) + " means for " +
                      std::to_string(set.n_d()) + " parameter blocks");
  }
  for (const auto& m : means) {
    if (!(m.value.grid().spec().nx == set.grid.nx && m.value.grid().spec().ny == set.grid.ny) ||
        m.value.size() != set.n_h()) {
      throw DomainError("fluctuations: mean and snapshots live on different grids");
    }
  }
  Matrix out = set.data;
  for (std::size_t d = 0; d < set.n_d(); ++d) {
    auto mean = means[d].value.values();
    for (std::size_t p = 0; p < set.n_t(); ++p) {
      auto col = out.col(d * set.n_t() + p);
      for (std::size_t k = 0; k < col.size(); ++k) col[k] -= mean[k];
    }
  }
  return out;
}

Matrix fluctuations(const SnapshotSet& set) { return fluctuations(set, time_averages(set)); }

SnapshotSet concatenate_blocks(const std::vector<SnapshotSet>& blocks) {
  if (blocks.empty()) throw DomainError("concatenate_blocks: no blocks");
  SnapshotSet out;
  const SnapshotSet& first = blocks.front();
  out.field = first.field;
  out.grid = first.grid;
  out.times = first.times;
  for (const auto& b : blocks) {
    if (b.field != first.field || b.grid.nx != first.grid.nx || b.grid.ny != first.grid.ny ||
        b.times != first.times) {
      throw DomainError("concatenate_blocks: blocks differ in field, grid or times");
    }
    if (b.n_d() != 1) throw DomainError("concatenate_blocks: input must hold one block each");
    out.params.push_back(b.params.empty() ? std::vector<double>{} : b.params.front());
    if (!b.physics.empty()) out.physics.push_back(b.physics.front());
    for (std::size_t c = 0; c < b.n_s(); ++c) out.data.append_col(b.data.col(c));
  }
  // A single time-only block stays time-only.
  if (out.params.size() == 1 && out.params.front().empty()) out.params.clear();
  out.validate();
  return out;
}

SnapshotCollector::SnapshotCollector(const GridSpec& grid, const PhysParams& physics,
                                     std::vector<double> param) {
  for (FieldId id : kAllFields) {
    SnapshotSet& s = sets_[static_cast<int>(id)];
    s.field = id;
    s.grid = grid;
    s.physics = {physics};
    if (!param.empty()) s.params = {param};
  }
}

void SnapshotCollector::operator()(const State& state) {
  for (FieldId id : kAllFields) {
    SnapshotSet& s = sets_[static_cast<int>(id)];
    s.times.push_back(state.t);
    s.data.append_col(field_of(state, id).values());
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto p = path;
  p.replace_extension(".meta.json");
  return p;
}

std::vector<unsigned char> encode(const SnapshotSet& set) {
  set.validate();
  std::vector<unsigned char> out;
  out.reserve(kHeaderBytes + 8 * (set.n_t() + set.n_d() * set.param_dim() + set.data.data().size()));
  for (char c : kMagic) out.push_back(static_cast<unsigned char>(c));
  put_u64(out, set.n_h());
  put_u64(out, set.n_t());
  put_u64(out, set.n_d());
  put_u64(out, set.param_dim());
  for (double t : set.times) put_f64(out, t);
  for (const auto& mu : set.params) {
    for (double v : mu) put_f64(out, v);
  }
  for (double v : set.data.data()) put_f64(out, v);
  return out;
}

SnapshotSet decode(std::span<const unsigned char> in) {
  if (in.size() < 8 || std::memcmp(in.data(), kMagic, 8) != 0) {
    throw FormatError("snapshot container: bad magic", 0);
  }
  if (in.size() < kHeaderBytes) throw FormatError("snapshot container: truncated header", in.size());
  const std::uint64_t n_h = get_u64(in, 8);
  const std::uint64_t n_t = get_u64(in, 16);
  const std::uint64_t n_d = get_u64(in, 24);
  const std::uint64_t dim = get_u64(in, 32);
  if (n_d == 0 || (dim == 0 && n_d != 1)) {
    throw FormatError("snapshot container: inconsistent header dimensions", 24);
  }

  std::size_t off = kHeaderBytes;
  auto need = [&](std::uint64_t count, const char* part) {
    std::uint64_t bytes = 0;
    if (!byte_count(count, bytes) || bytes > in.size() - off) {
      throw FormatError(std::string("snapshot container: truncated ") + part, in.size());
    }
  };

  SnapshotSet set;
  need(n_t, "times");
  set.times.resize(n_t);
  for (auto& t : set.times) {
    t = get_f64(in, off);
    off += 8;
  }

  if (dim > 0 && n_d > std::numeric_limits<std::uint64_t>::max() / dim) {
    throw FormatError("snapshot container: inconsistent header dimensions", 24);
  }
  need(n_d * dim, "parameter vectors");
  if (dim > 0) {
    set.params.assign(n_d, std::vector<double>(dim));
    for (auto& mu : set.params) {
      for (auto& v : mu) {
        v = get_f64(in, off);
        off += 8;
      }
    }
  }

  const std::uint64_t cols = n_t * n_d;
  if ((n_t != 0 && cols / n_t != n_d) || (cols != 0 && n_h > std::numeric_limits<std::uint64_t>::max() / cols)) {
    throw FormatError("snapshot container: inconsistent header dimensions", 8);
  }
  need(n_h * cols, "matrix payload");
  set.data = Matrix(n_h, cols);
  for (double& v : set.data.data()) {
    v = get_f64(in, off);
    off += 8;
  }
  if (off != in.size()) throw FormatError("snapshot container: trailing bytes", off);
  return set;
}

void save(const SnapshotSet& set, const std::filesystem::path& path, const std::string& extra_json) {
  const auto bytes = encode(set);
  write_file_bytes(path, bytes);

  nlohmann::json meta;
  meta["field_id"] = std::string(to_string(set.field));
  meta["grid"] = {{"nx", set.grid.nx}, {"ny", set.grid.ny}, {"x0", set.grid.x0},
                  {"xf", set.grid.xf}, {"y_lo", set.grid.y_lo}, {"y_hi", set.grid.y_hi}};
  meta["dimensions"] = {{"N_h", set.n_h()}, {"N_t", set.n_t()}, {"N_d", set.n_d()},
                        {"param_dim", set.param_dim()}};
  meta["params"] = set.params;
  meta["physics"] = nlohmann::json::array();
  for (const auto& p : set.physics) meta["physics"].push_back(physics_json(p));
  if (!set.times.empty()) meta["time_range"] = {set.times.front(), set.times.back()};
  meta["digest"] = hex_digest(fnv1a64(bytes));
  if (!extra_json.empty()) {
    const auto extra = nlohmann::json::parse(extra_json);
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
  }
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

SnapshotSet load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  SnapshotSet set = decode(bytes);

  const auto meta_path = sidecar_path(path);
  std::ifstream in(meta_path);
  if (!in) throw IoError("missing sidecar " + meta_path.string());
  try {
    const auto meta = nlohmann::json::parse(in);
    set.field = field_from_string(meta.at("field_id").get<std::string>());
    const auto& g = meta.at("grid");
    set.grid = GridSpec{g.at("nx").get<int>(),    g.at("ny").get<int>(),
                        g.at("x0").get<double>(), g.at("xf").get<double>(),
                        g.at("y_lo").get<double>(), g.at("y_hi").get<double>()};
    const auto& dims = meta.at("dimensions");
    if (dims.at("N_h").get<std::size_t>() != set.n_h() ||
        dims.at("N_t").get<std::size_t>() != set.n_t() ||
        dims.at("N_d").get<std::size_t>() != set.n_d() ||
        dims.at("param_dim").get<std::size_t>() != set.param_dim()) {
      throw FormatError("sidecar dimensions disagree with the container", 0);
    }
    for (const auto& p : meta.at("physics")) set.physics.push_back(physics_from_json(p));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("sidecar: ") + e.what(), 0);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("sidecar: ") + e.what(), 0);
  }
  try {
    set.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("snapshot container: ") + e.what(), kHeaderBytes);
  }
  return set;
}

void export_column_csv(const SnapshotSet& set, std::size_t c, const std::filesystem::path& path) {
  if (c >= set.n_s()) throw DomainError("export_column_csv: column out of range");
  write_field_csv(path, set.column_field(c));
}

}  // namespace qg2rom
