#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "loopcft/cft_core.hpp"

namespace loopcft {

enum class Topology { strip, cylinder };

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

/// Square-lattice strip or cylinder of odd width L at the critical point v = sqrt(Q).
///
/// On a wired strip the sites of columns 1 and L are the boundary sites; they
/// all belong to one cluster whose weight is q1 = 1. Elsewhere q1 = q.
struct Geometry {
    int width_l = 5;
    Topology topology = Topology::strip;
    BoundaryCondition bc = BoundaryCondition::free;
    double v_coupling = 1.4142135623730951;
    double q = 2.0;
    double q1 = 2.0;

    static Geometry critical(int width_l, Topology topology, BoundaryCondition bc, double q);

    bool wired() const { return topology == Topology::strip && bc == BoundaryCondition::wired; }
    /// 0-based index of the middle column.
    int middle_column() const { return (width_l - 1) / 2; }
    std::string describe() const;
};

/// A lattice site: row (time direction) and 0-based column.
struct Site {
    int row = 0;
    int column = 0;
};

/// Non-crossing partition of the L sites of a row, with up to two marked parts.
///
/// Parts are labelled 0, 1, ... in order of first appearance. Mark a belongs to
/// the cluster of the first inserted point, mark b to the second; a state with
/// b set always has a set too, on a different part.
struct PartitionState {
    std::vector<int> labels;
    int mark_a = -1;
    int mark_b = -1;

    int parts() const;
    int marks() const { return (mark_a >= 0) + (mark_b >= 0); }
    /// Part holding site 0 on a wired strip; the caller checks wiredness.
    int boundary_part() const { return labels.empty() ? -1 : labels.front(); }
    std::uint64_t key() const;
    static PartitionState from_key(std::uint64_t key, int width);
    void canonicalize();
    std::string to_string() const;
};

/// All admissible states with a fixed number of marks, densely indexed.
class StateSpace {
public:
    StateSpace(int width, Topology topology, bool wired, int marks, std::vector<std::uint64_t> keys);

    int width() const { return width_; }
    Topology topology() const { return topology_; }
    bool wired() const { return wired_; }
    int marks() const { return marks_; }
    std::size_t size() const { return keys_.size(); }
    std::uint64_t key(std::size_t i) const { return keys_[i]; }
    PartitionState state(std::size_t i) const { return PartitionState::from_key(keys_[i], width_); }
    /// Dense index of the state, or -1.
    std::int64_t find(const PartitionState& s) const;
    std::int64_t find_key(std::uint64_t key) const;
    bool compatible(const Geometry& g) const;

    void save(const std::filesystem::path& path) const;
    static StateSpace load(const std::filesystem::path& path);

private:
    int width_;
    Topology topology_;
    bool wired_;
    int marks_;
    std::vector<std::uint64_t> keys_;
    std::unordered_map<std::uint64_t, std::int64_t> index_;
};

/// Width guard for enumeration.
inline constexpr int kMaxWidth = 13;

/// Throws CapacityError above kMaxWidth.
StateSpace enumerate_states(const Geometry& geometry, int marks = 0);

/// As enumerate_states, reading and writing a binary cache in dir when it is non-empty.
std::shared_ptr<const StateSpace> cached_states(const Geometry& geometry, int marks, const std::filesystem::path& dir);

struct WeightedStateVector {
    std::shared_ptr<const StateSpace> space;
    std::vector<double> amplitudes;
    /// The represented vector is exp(log_scale) * amplitudes.
    double log_scale = 0.0;

    void renormalize();
};

/// Transfer matrix of one row for one mark sector: L vertical-edge operators
/// followed by the horizontal-edge operators, each of the form
/// a * identity + (sparse map with one target per state).
class RowTransfer {
public:
    /// The unmarked space is needed when space has two marks, since joining
    /// the two marked parts leads to an unmarked state.
    RowTransfer(const Geometry& geometry, std::shared_ptr<const StateSpace> space,
                std::shared_ptr<const StateSpace> unmarked = nullptr, bool forward = true);

    const Geometry& geometry() const { return geometry_; }
    const std::shared_ptr<const StateSpace>& space() const { return space_; }
    std::size_t operator_count() const { return ops_.size(); }

    /// Forward application of a full row (vertical then horizontal edges).
    void apply(std::vector<double>& x) const;
    /// Horizontal edges only; the first row of a lattice.
    void apply_horizontal(std::vector<double>& x) const;
    /// Transposed row: y = T^T x. For a two-mark space, companion holds the
    /// stages of the unmarked covector recorded by record_transposed.
    void apply_transposed(std::vector<double>& x, const std::vector<std::vector<double>>* companion = nullptr) const;
    /// Applies T^T to an unmarked covector and returns the input of every operator, last operator first.
    std::vector<std::vector<double>> record_transposed(std::vector<double>& x) const;

private:
    struct EdgeOp {
        bool vertical = false;
        std::vector<std::uint32_t> target;
        std::vector<std::uint32_t> pre_offsets;
        std::vector<std::uint32_t> pre_sources;
    };

    double weight_of(const EdgeOp& op, std::uint32_t t) const;
    void forward_op(const EdgeOp& op, std::vector<double>& x, std::vector<double>& y) const;

    Geometry geometry_;
    std::shared_ptr<const StateSpace> space_;
    std::shared_ptr<const StateSpace> unmarked_;
    std::vector<EdgeOp> ops_;
    std::size_t horizontal_begin_ = 0;
};

/// One full row applied to vector. Throws DomainError if the vector's space
/// does not belong to this geometry or carries two marks.
WeightedStateVector apply_row(const WeightedStateVector& vector, const Geometry& geometry);

/// log Z for a lattice of rows + 1 site rows, free at both ends.
double log_partition_function(const Geometry& geometry, int rows);

/// P(z1 ~ z2) on a lattice of rows + 1 site rows.
double connectivity(const Geometry& geometry, int rows, Site z1, Site z2);

struct CorrelatorOptions {
    /// Rows of lattice below the first and above the second point; negative
    /// means projection onto the leading eigenvectors (infinitely long lattice).
    int end_rows = -1;
    double eigen_tolerance = 1e-14;
    int max_iterations = 100000;
    std::filesystem::path cache_dir;
};

struct CorrelatorSeries {
    std::vector<int> distances;
    std::vector<double> values;
};

/// Connectivity between the middle-column sites of rows 0 and u, u = 0..u_max.
CorrelatorSeries correlator(const Geometry& geometry, int u_max, const CorrelatorOptions& options = {});

struct AmplitudeGap {
    double amplitude = 0.0;
    double gap = 0.0;
    double background = 0.0;
};

/// Fits C(u) = A exp(-m u), or B + A exp(-m u) when with_background is set.
/// Throws ConvergenceError when the estimates have not stabilised to 1e-8
/// over the last quarter of the series.
AmplitudeGap amplitude_and_gap(const CorrelatorSeries& series, bool with_background = false);

struct LatticeOptions {
    /// Number of rows in the correlator window, per unit of width.
    int rows_per_width = 30;
    CorrelatorOptions correlator;
};

struct LatticeRatio {
    int width_l = 0;
    double q = 0.0;
    BoundaryCondition bc = BoundaryCondition::wired;
    double ratio = 0.0;
    double amplitude_cylinder = 0.0;
    double amplitude_strip = 0.0;
    double gap_cylinder = 0.0;
    double gap_strip = 0.0;
};

/// lambda / mu = (A_cyl / A_strip) 2^{2 Delta_b - 8 Delta}. On a wired strip
/// A_strip is the plateau of the connectivity.
LatticeRatio lattice_ratio(int width_l, double q, BoundaryCondition bc, const LatticeOptions& options = {});

struct BruteForceResult {
    double partition_function = 0.0;
    double connected_weight = 0.0;
    double connectivity = 0.0;
    int edges = 0;
};

/// Exhaustive sum over all edge subsets. Throws CapacityError above 26 edges.
BruteForceResult brute_force_oracle(const Geometry& geometry, int rows, Site z1, Site z2);

/// <sigma(z1) sigma(z2)> of the Ising model (Q = 2) from the 2^L spin transfer
/// matrix; on a wired strip the spins of columns 1 and L are fixed to +1.
double ising_spin_correlator(const Geometry& geometry, int rows, Site z1, Site z2);

}  // namespace loopcft
