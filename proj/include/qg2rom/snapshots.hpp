#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qg2rom/fom.hpp"
#include "qg2rom/grid.hpp"
#include "qg2rom/matrix.hpp"

namespace qg2rom {

enum class FieldId { q1, q2, psi1, psi2 };

inline constexpr std::array<FieldId, 4> kAllFields{FieldId::q1, FieldId::q2, FieldId::psi1,
                                                   FieldId::psi2};

std::string_view to_string(FieldId id);
// Throws ConfigError for an unknown name.
FieldId field_from_string(std::string_view name);
const Field& field_of(const State& s, FieldId id);

// Raw snapshots of one field. Columns are grouped in parameter blocks:
// column d * n_t() + p holds the field at times[p] for parameter params[d].
// `params` is empty in the time-only case.
struct SnapshotSet {
  FieldId field = FieldId::q1;
  GridSpec grid;
  std::vector<double> times;
  std::vector<std::vector<double>> params;
  // Physics per parameter block (or a single entry); only recorded in the
  // sidecar.
  std::vector<PhysParams> physics;
  Matrix data;

  std::size_t n_h() const { return data.rows(); }
  std::size_t n_t() const { return times.size(); }
  std::size_t n_d() const { return params.empty() ? 1 : params.size(); }
  std::size_t n_s() const { return data.cols(); }
  std::size_t param_dim() const { return params.empty() ? 0 : params.front().size(); }

  Matrix block(std::size_t d) const { return data.cols_range(d * n_t(), n_t()); }
  Field column_field(std::size_t c) const;

  // Throws DomainError when the invariants (column count, row count against
  // the grid, finite values, strictly increasing times, equal parameter
  // lengths) do not hold.
  void validate() const;
};

struct TimeAverage {
  FieldId field = FieldId::q1;
  std::vector<double> param;
  Field value;
};

// Mean of parameter block `param_index`. Throws DomainError for an empty set
// or an out-of-range index.
TimeAverage time_average(const SnapshotSet& set, std::size_t param_index = 0);
std::vector<TimeAverage> time_averages(const SnapshotSet& set);

// Each column minus the mean of its parameter block. `means` holds one entry
// per block. Throws DomainError on a grid or count mismatch.
Matrix fluctuations(const SnapshotSet& set, const std::vector<TimeAverage>& means);
Matrix fluctuations(const SnapshotSet& set);

// Joins time-only or single-block sets of the same field, grid and times into
// one parametric set, in the given order.
SnapshotSet concatenate_blocks(const std::vector<SnapshotSet>& blocks);

// Accumulates the four fields of every state handed to it by run_fom.
class SnapshotCollector {
 public:
  SnapshotCollector(const GridSpec& grid, const PhysParams& physics,
                    std::vector<double> param = {});

  void operator()(const State& s);
  SnapshotSet& set(FieldId id) { return sets_[static_cast<int>(id)]; }
  const SnapshotSet& set(FieldId id) const { return sets_[static_cast<int>(id)]; }

 private:
  std::array<SnapshotSet, 4> sets_;
};

// Sidecar next to a container: "dir/q1.qgs" -> "dir/q1.meta.json".
std::filesystem::path sidecar_path(const std::filesystem::path& path);

// Binary container:
//   "QGSNAP01", u64 LE {N_h, N^t, N^d, param_dim}, N^t times,
//   N^d * param_dim parameter values, N_h * N^t * N^d values column-major.
// All reals are little-endian binary64. A time-only set is written with
// N^d = 1 and param_dim = 0. `extra` is merged into the JSON sidecar as
// pre-serialized JSON object members (may be empty).
void save(const SnapshotSet& set, const std::filesystem::path& path,
          const std::string& extra_json = {});
// Throws FormatError naming the failing part ("magic", "header", "times",
// "parameter vectors", "matrix payload", "trailing bytes", "sidecar") and
// IoError when a file cannot be read.
SnapshotSet load(const std::filesystem::path& path);

std::vector<unsigned char> encode(const SnapshotSet& set);
// Decodes the container only; field id and grid come from the caller.
SnapshotSet decode(std::span<const unsigned char> bytes);

// x,y,value export of column `c`.
void export_column_csv(const SnapshotSet& set, std::size_t c, const std::filesystem::path& path);

}  // namespace qg2rom
