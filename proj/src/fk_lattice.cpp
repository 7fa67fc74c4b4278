#include "loopcft/fk_lattice.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "loopcft/errors.hpp"

namespace loopcft {

namespace {

constexpr std::uint32_t kZero = 1u << 31;
constexpr std::uint32_t kWeightQ = 1u << 30;
constexpr std::uint32_t kToUnmarked = 1u << 29;
constexpr std::uint32_t kIndexMask = kToUnmarked - 1;

constexpr char kCacheMagic[8] = {'L', 'C', 'F', 'T', 'S', 'S', '0', '1'};
constexpr std::uint32_t kCacheVersion = 1;

// Non-crossing partitions of n points as label strings, parts numbered by first appearance.
void non_crossing(int n, std::vector<int>& labels, std::vector<int>& open, int next, std::vector<std::vector<int>>& out) {
    const int i = static_cast<int>(std::count_if(labels.begin(), labels.end(), [](int x) { return x >= 0; }));
    if (i == n) {
        out.push_back(labels);
        return;
    }
    labels[i] = next;
    open.push_back(next);
    non_crossing(n, labels, open, next + 1, out);
    open.pop_back();
    for (int idx = static_cast<int>(open.size()) - 1; idx >= 0; --idx) {
        const std::vector<int> saved = open;
        labels[i] = open[idx];
        open.resize(idx + 1);
        non_crossing(n, labels, open, next, out);
        open = saved;
    }
    labels[i] = -1;
}

std::pair<PartitionState, std::uint32_t> detach(PartitionState s, int j, bool wired) {
    const int n = static_cast<int>(s.labels.size());
    if (wired && (j == 0 || j == n - 1)) return {s, 0};
    const int k = s.labels[j];
    const auto size = std::count(s.labels.begin(), s.labels.end(), k);
    if (size > 1) {
        s.labels[j] = s.parts();
        s.canonicalize();
        return {s, 0};
    }
    if (k == s.mark_a || k == s.mark_b) return {s, kZero};
    return {s, kWeightQ};
}

std::pair<PartitionState, std::uint32_t> join(PartitionState s, int i, int j) {
    const int k1 = s.labels[i], k2 = s.labels[j];
    if (k1 == k2) return {s, 0};
    std::uint32_t flag = 0;
    if ((s.mark_a == k1 && s.mark_b == k2) || (s.mark_a == k2 && s.mark_b == k1)) {
        s.mark_a = s.mark_b = -1;
        flag = kToUnmarked;
    }
    for (int& x : s.labels)
        if (x == k2) x = k1;
    if (s.mark_a == k2) s.mark_a = k1;
    if (s.mark_b == k2) s.mark_b = k1;
    s.canonicalize();
    return {s, flag};
}

PartitionState initial_state(const Geometry& g) {
    PartitionState s;
    s.labels.resize(g.width_l);
    std::iota(s.labels.begin(), s.labels.end(), 0);
    if (g.wired() && g.width_l > 1) s.labels.back() = 0;
    s.canonicalize();
    return s;
}

double closing_weight(const PartitionState& s, const Geometry& g) {
    if (s.marks() > 0) return 0.0;
    const int parts = s.parts();
    if (g.wired()) return g.q1 * std::pow(g.q, parts - 1);
    return std::pow(g.q, parts);
}

void check_geometry(const Geometry& g) {
    if (g.width_l < 1 || g.width_l % 2 == 0) throw DomainError("geometry: width must be a positive odd integer");
    if (g.width_l > kMaxWidth) throw CapacityError("geometry: width " + std::to_string(g.width_l) + " exceeds the guard");
    if (g.topology == Topology::cylinder && g.width_l < 3) throw DomainError("geometry: a cylinder needs width >= 3");
    if (g.wired() && g.width_l < 3) throw DomainError("geometry: a wired strip needs width >= 3");
    if (!(g.q > 0.0)) throw DomainError("geometry: q must be positive");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::fabs(x));
    return m;
}

void scale(std::vector<double>& a, double f) {
    for (double& x : a) x *= f;
}

// Transfer matrices of the three mark sectors of one geometry.
struct Engine {
    Geometry g;
    std::shared_ptr<const StateSpace> s0, s1, s2;
    std::unique_ptr<RowTransfer> t0, t1, t2;

    Engine(const Geometry& geometry, const std::filesystem::path& cache, bool with_marks) : g(geometry) {
        s0 = cached_states(g, 0, cache);
        t0 = std::make_unique<RowTransfer>(g, s0);
        if (with_marks) {
            s1 = cached_states(g, 1, cache);
            s2 = cached_states(g, 2, cache);
            t1 = std::make_unique<RowTransfer>(g, s1);
            t2 = std::make_unique<RowTransfer>(g, s2, s0, false);
        }
    }

    std::vector<double> initial() const {
        std::vector<double> r(s0->size(), 0.0);
        r[s0->find(initial_state(g))] = 1.0;
        t0->apply_horizontal(r);
        return r;
    }

    std::vector<double> closing() const {
        std::vector<double> c(s0->size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = closing_weight(s0->state(i), g);
        return c;
    }
};

struct Ends {
    std::vector<double> bottom;  // unmarked vector at the first point
    std::vector<double> top0;    // unmarked covector at the second point
    std::vector<double> top2;    // two-mark covector at the second point
    double growth = 1.0;         // per-row factor divided out while transferring
};

// Leading right or left eigenvector of the unmarked transfer matrix, normalized to unit sum.
std::pair<std::vector<double>, double> leading_vector(const Engine& e, std::vector<double> x, bool transposed,
                                                      const CorrelatorOptions& opt) {
    scale(x, 1.0 / std::accumulate(x.begin(), x.end(), 0.0));
    double lambda = 0.0;
    for (int it = 0; it < opt.max_iterations; ++it) {
        std::vector<double> y = x;
        if (transposed)
            e.t0->apply_transposed(y);
        else
            e.t0->apply(y);
        lambda = std::accumulate(y.begin(), y.end(), 0.0);
        scale(y, 1.0 / lambda);
        double diff = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) diff = std::max(diff, std::fabs(y[i] - x[i]));
        x = std::move(y);
        if (diff <= opt.eigen_tolerance * max_abs(x)) return {x, lambda};
    }
    throw ConvergenceError("correlator: power iteration for the leading eigenvector did not converge");
}

Ends make_ends(const Engine& e, int bottom_rows, int top_rows, const CorrelatorOptions& opt) {
    Ends ends;
    if (bottom_rows < 0 || top_rows < 0) {
        auto [r, lambda] = leading_vector(e, e.initial(), false, opt);
        auto [l, lambda_t] = leading_vector(e, e.closing(), true, opt);
        if (std::fabs(lambda - lambda_t) > 1e-10 * lambda)
            throw ConvergenceError("correlator: left and right leading eigenvalues differ");
        ends.bottom = std::move(r);
        ends.top0 = std::move(l);
        ends.growth = lambda;
        std::vector<double> top2(e.s2->size(), 0.0);
        std::vector<double> l0 = ends.top0;
        const auto stages = e.t0->record_transposed(l0);
        for (int it = 0; it < opt.max_iterations; ++it) {
            std::vector<double> y = top2;
            e.t2->apply_transposed(y, &stages);
            scale(y, 1.0 / lambda);
            double diff = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) diff = std::max(diff, std::fabs(y[i] - top2[i]));
            top2 = std::move(y);
            if (diff <= opt.eigen_tolerance * std::max(max_abs(top2), max_abs(ends.top0))) {
                ends.top2 = std::move(top2);
                return ends;
            }
        }
        throw ConvergenceError("correlator: two-mark covector did not converge");
    }

    ends.bottom = e.initial();
    for (int i = 0; i < bottom_rows; ++i) {
        e.t0->apply(ends.bottom);
        scale(ends.bottom, 1.0 / max_abs(ends.bottom));
    }
    ends.top0 = e.closing();
    ends.top2.assign(e.s2->size(), 0.0);
    for (int i = 0; i < top_rows; ++i) {
        const auto stages = e.t0->record_transposed(ends.top0);
        e.t2->apply_transposed(ends.top2, &stages);
        const double f = 1.0 / std::max(max_abs(ends.top0), max_abs(ends.top2));
        scale(ends.top0, f);
        scale(ends.top2, f);
    }
    ends.growth = 0.0;
    return ends;
}

// Connectivity of (row 0, c1) and (row u, c2) for u = 0..u_max between the given ends.
std::vector<double> two_point(const Engine& e, const Ends& ends, int c1, int c2, int u_max) {
    const auto& s0 = *e.s0;
    const auto& s1 = *e.s1;
    const auto& s2 = *e.s2;

    std::vector<double> w(s1.size(), 0.0);
    for (std::size_t i = 0; i < s0.size(); ++i) {
        if (ends.bottom[i] == 0.0) continue;
        PartitionState s = s0.state(i);
        s.mark_a = s.labels[c1];
        w[s1.find(s)] += ends.bottom[i];
    }

    // Second insertion: either the point is already in the marked cluster, or it marks its own.
    std::vector<double> close(s1.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        PartitionState s = s1.state(i);
        const int k = s.labels[c2];
        if (k == s.mark_a) {
            s.mark_a = -1;
            close[i] = ends.top0[s0.find(s)];
        } else {
            s.mark_b = k;
            close[i] = ends.top2[s2.find(s)];
        }
    }

    std::vector<double> r = ends.bottom;
    std::vector<double> out;
    for (int u = 0;; ++u) {
        out.push_back(dot(close, w) / dot(ends.top0, r));
        if (u == u_max) break;
        e.t1->apply(w);
        e.t0->apply(r);
        const double f = ends.growth > 0.0 ? 1.0 / ends.growth : 1.0 / max_abs(r);
        scale(w, f);
        scale(r, f);
    }
    return out;
}

}  // namespace

std::string to_string(Topology t) { return t == Topology::strip ? "strip" : "cylinder"; }

Topology topology_from_string(const std::string& s) {
    if (s == "strip") return Topology::strip;
    if (s == "cylinder") return Topology::cylinder;
    throw DomainError("unknown topology '" + s + "'");
}

Geometry Geometry::critical(int width_l, Topology topology, BoundaryCondition bc, double q) {
    Geometry g;
    g.width_l = width_l;
    g.topology = topology;
    g.bc = topology == Topology::cylinder ? BoundaryCondition::free : bc;
    g.q = q;
    g.v_coupling = std::sqrt(q);
    g.q1 = g.wired() ? 1.0 : q;
    return g;
}

std::string Geometry::describe() const {
    std::ostringstream os;
    os << to_string(topology) << " L=" << width_l;
    if (topology == Topology::strip) os << " " << to_string(bc);
    os << " q=" << q;
    return os.str();
}

int PartitionState::parts() const {
    int m = -1;
    for (int x : labels) m = std::max(m, x);
    return m + 1;
}

std::uint64_t PartitionState::key() const {
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) k |= static_cast<std::uint64_t>(labels[i]) << (4 * i);
    k |= static_cast<std::uint64_t>(mark_a + 1) << 52;
    k |= static_cast<std::uint64_t>(mark_b + 1) << 56;
    return k;
}

PartitionState PartitionState::from_key(std::uint64_t key, int width) {
    PartitionState s;
    s.labels.resize(width);
    for (int i = 0; i < width; ++i) s.labels[i] = static_cast<int>((key >> (4 * i)) & 0xF);
    s.mark_a = static_cast<int>((key >> 52) & 0xF) - 1;
    s.mark_b = static_cast<int>((key >> 56) & 0xF) - 1;
    return s;
}

void PartitionState::canonicalize() {
    std::vector<int> map(labels.size() + 1, -1);
    int next = 0;
    for (int& x : labels) {
        if (map[x] < 0) map[x] = next++;
        x = map[x];
    }
    if (mark_a >= 0) mark_a = map[mark_a];
    if (mark_b >= 0) mark_b = map[mark_b];
}

std::string PartitionState::to_string() const {
    std::ostringstream os;
    for (int x : labels) os << x;
    if (mark_a >= 0) os << " a=" << mark_a;
    if (mark_b >= 0) os << " b=" << mark_b;
    return os.str();
}

StateSpace::StateSpace(int width, Topology topology, bool wired, int marks, std::vector<std::uint64_t> keys)
    : width_(width), topology_(topology), wired_(wired), marks_(marks), keys_(std::move(keys)) {
    index_.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) index_.emplace(keys_[i], static_cast<std::int64_t>(i));
}

std::int64_t StateSpace::find(const PartitionState& s) const { return find_key(s.key()); }

std::int64_t StateSpace::find_key(std::uint64_t key) const {
    auto it = index_.find(key);
    return it == index_.end() ? -1 : it->second;
}

bool StateSpace::compatible(const Geometry& g) const {
    return width_ == g.width_l && topology_ == g.topology && wired_ == g.wired();
}

void StateSpace::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("state cache: cannot write " + path.string());
    const std::int32_t header[5] = {static_cast<std::int32_t>(kCacheVersion), width_,
                                    topology_ == Topology::strip ? 0 : 1, wired_ ? 1 : 0, marks_};
    const std::uint64_t count = keys_.size();
    out.write(kCacheMagic, sizeof kCacheMagic);
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    out.write(reinterpret_cast<const char*>(keys_.data()), static_cast<std::streamsize>(count * sizeof(std::uint64_t)));
}

StateSpace StateSpace::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("state cache: cannot read " + path.string());
    char magic[8];
    std::int32_t header[5];
    std::uint64_t count = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(header), sizeof header);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || !std::equal(magic, magic + 8, kCacheMagic) || header[0] != static_cast<std::int32_t>(kCacheVersion))
        throw DomainError("state cache: bad header in " + path.string());
    std::vector<std::uint64_t> keys(count);
    in.read(reinterpret_cast<char*>(keys.data()), static_cast<std::streamsize>(count * sizeof(std::uint64_t)));
    if (!in) throw DomainError("state cache: truncated file " + path.string());
    return StateSpace(header[1], header[2] == 0 ? Topology::strip : Topology::cylinder, header[3] == 1, header[4],
                      std::move(keys));
}

StateSpace enumerate_states(const Geometry& geometry, int marks) {
    check_geometry(geometry);
    if (marks < 0 || marks > 2) throw DomainError("enumerate_states: marks must be 0, 1 or 2");
    const int n = geometry.width_l;
    std::vector<std::vector<int>> parts;
    std::vector<int> labels(n, -1), open;
    non_crossing(n, labels, open, 0, parts);

    std::vector<std::uint64_t> keys;
    for (const auto& p : parts) {
        if (geometry.wired() && p.back() != p.front()) continue;
        PartitionState s;
        s.labels = p;
        const int k = s.parts();
        if (marks == 0) {
            keys.push_back(s.key());
        } else if (marks == 1) {
            for (int a = 0; a < k; ++a) {
                s.mark_a = a;
                keys.push_back(s.key());
            }
        } else {
            for (int a = 0; a < k; ++a) {
                for (int b = 0; b < k; ++b) {
                    if (a == b) continue;
                    s.mark_a = a;
                    s.mark_b = b;
                    keys.push_back(s.key());
                }
            }
        }
    }
    return StateSpace(n, geometry.topology, geometry.wired(), marks, std::move(keys));
}

std::shared_ptr<const StateSpace> cached_states(const Geometry& geometry, int marks, const std::filesystem::path& dir) {
    if (dir.empty()) return std::make_shared<const StateSpace>(enumerate_states(geometry, marks));
    std::ostringstream name;
    name << "states_L" << geometry.width_l << "_" << to_string(geometry.topology) << (geometry.wired() ? "_wired" : "")
         << "_m" << marks << ".bin";
    const auto path = dir / name.str();
    if (std::filesystem::exists(path)) {
        auto s = std::make_shared<const StateSpace>(StateSpace::load(path));
        if (s->compatible(geometry) && s->marks() == marks) return s;
    }
    auto s = std::make_shared<const StateSpace>(enumerate_states(geometry, marks));
    std::filesystem::create_directories(dir);
    s->save(path);
    return s;
}

void WeightedStateVector::renormalize() {
    const double m = max_abs(amplitudes);
    if (m == 0.0) return;
    scale(amplitudes, 1.0 / m);
    log_scale += std::log(m);
}

RowTransfer::RowTransfer(const Geometry& geometry, std::shared_ptr<const StateSpace> space,
                         std::shared_ptr<const StateSpace> unmarked, bool forward)
    : geometry_(geometry), space_(std::move(space)), unmarked_(std::move(unmarked)) {
    check_geometry(geometry_);
    if (!space_->compatible(geometry_)) throw DomainError("RowTransfer: state space does not match the geometry");
    if (space_->marks() == 2 && !unmarked_) throw DomainError("RowTransfer: two-mark space needs the unmarked space");
    if (space_->marks() == 2 && forward) throw DomainError("RowTransfer: two-mark space is transposed only");

    const int n = geometry_.width_l;
    const bool wired = geometry_.wired();
    std::vector<std::pair<int, int>> bonds;
    for (int j = 0; j + 1 < n; ++j) bonds.emplace_back(j, j + 1);
    if (geometry_.topology == Topology::cylinder) bonds.emplace_back(n - 1, 0);

    const auto size = static_cast<std::int64_t>(space_->size());
    auto build = [&](bool vertical, int a, int b) {
        EdgeOp op;
        op.vertical = vertical;
        op.target.resize(size);
        bool missing = false;
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < size; ++i) {
            const PartitionState s = space_->state(i);
            auto [t, flag] = vertical ? detach(s, a, wired) : join(s, a, b);
            if (flag & kZero) {
                op.target[i] = kZero;
                continue;
            }
            const std::int64_t idx = (flag & kToUnmarked) ? unmarked_->find(t) : space_->find(t);
            if (idx < 0) {
#pragma omp atomic write
                missing = true;
                continue;
            }
            op.target[i] = static_cast<std::uint32_t>(idx) | flag;
        }
        if (missing) throw DomainError("RowTransfer: a transition leaves the state space");
        if (forward) {
            op.pre_offsets.assign(size + 1, 0);
            for (std::int64_t i = 0; i < size; ++i)
                if (!(op.target[i] & kZero)) ++op.pre_offsets[(op.target[i] & kIndexMask) + 1];
            for (std::int64_t i = 0; i < size; ++i) op.pre_offsets[i + 1] += op.pre_offsets[i];
            op.pre_sources.resize(op.pre_offsets[size]);
            std::vector<std::uint32_t> fill(op.pre_offsets.begin(), op.pre_offsets.end() - 1);
            for (std::int64_t i = 0; i < size; ++i)
                if (!(op.target[i] & kZero)) op.pre_sources[fill[op.target[i] & kIndexMask]++] = static_cast<std::uint32_t>(i);
        }
        ops_.push_back(std::move(op));
    };
    for (int j = 0; j < n; ++j) build(true, j, j);
    horizontal_begin_ = ops_.size();
    for (auto [a, b] : bonds) build(false, a, b);
}

double RowTransfer::weight_of(const EdgeOp& op, std::uint32_t t) const {
    if (t & kZero) return 0.0;
    if (!op.vertical) return geometry_.v_coupling;
    return (t & kWeightQ) ? geometry_.q : 1.0;
}

void RowTransfer::forward_op(const EdgeOp& op, std::vector<double>& x, std::vector<double>& y) const {
    const double a = op.vertical ? geometry_.v_coupling : 1.0;
    const auto size = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < size; ++t) {
        double acc = a * x[t];
        for (std::uint32_t k = op.pre_offsets[t]; k < op.pre_offsets[t + 1]; ++k) {
            const std::uint32_t s = op.pre_sources[k];
            acc += weight_of(op, op.target[s]) * x[s];
        }
        y[t] = acc;
    }
    x.swap(y);
}

void RowTransfer::apply(std::vector<double>& x) const {
    if (x.size() != space_->size()) throw DomainError("RowTransfer: vector size does not match the state space");
    if (ops_.front().pre_offsets.empty()) throw DomainError("RowTransfer: built without forward tables");
    std::vector<double> y(x.size());
    for (const auto& op : ops_) forward_op(op, x, y);
}

void RowTransfer::apply_horizontal(std::vector<double>& x) const {
    if (x.size() != space_->size()) throw DomainError("RowTransfer: vector size does not match the state space");
    std::vector<double> y(x.size());
    for (std::size_t k = horizontal_begin_; k < ops_.size(); ++k) forward_op(ops_[k], x, y);
}

std::vector<std::vector<double>> RowTransfer::record_transposed(std::vector<double>& x) const {
    std::vector<std::vector<double>> stages;
    stages.reserve(ops_.size());
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        stages.push_back(x);
        const auto& op = *it;
        const double a = op.vertical ? geometry_.v_coupling : 1.0;
        const auto& in = stages.back();
        const auto size = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t s = 0; s < size; ++s) {
            const std::uint32_t t = op.target[s];
            x[s] = a * in[s] + ((t & kZero) ? 0.0 : weight_of(op, t) * in[t & kIndexMask]);
        }
    }
    return stages;
}

void RowTransfer::apply_transposed(std::vector<double>& x, const std::vector<std::vector<double>>* companion) const {
    if (x.size() != space_->size()) throw DomainError("RowTransfer: vector size does not match the state space");
    if (space_->marks() == 2 && (!companion || companion->size() != ops_.size()))
        throw DomainError("RowTransfer: two-mark transposition needs the unmarked stages");
    std::vector<double> in(x.size());
    std::size_t step = 0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it, ++step) {
        in.swap(x);
        const auto& op = *it;
        const double a = op.vertical ? geometry_.v_coupling : 1.0;
        const std::vector<double>* other = companion ? &(*companion)[step] : nullptr;
        const auto size = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t s = 0; s < size; ++s) {
            const std::uint32_t t = op.target[s];
            double acc = a * in[s];
            if (!(t & kZero)) {
                const double src = (t & kToUnmarked) ? (*other)[t & kIndexMask] : in[t & kIndexMask];
                acc += weight_of(op, t) * src;
            }
            x[s] = acc;
        }
    }
}

WeightedStateVector apply_row(const WeightedStateVector& vector, const Geometry& geometry) {
    if (!vector.space || !vector.space->compatible(geometry))
        throw DomainError("apply_row: vector is indexed against a different geometry");
    if (vector.amplitudes.size() != vector.space->size()) throw DomainError("apply_row: index mismatch");
    if (vector.space->marks() > 1) throw DomainError("apply_row: forward transfer supports at most one mark");
    const RowTransfer t(geometry, vector.space);
    WeightedStateVector out = vector;
    t.apply(out.amplitudes);
    out.renormalize();
    return out;
}

double log_partition_function(const Geometry& geometry, int rows) {
    if (rows < 0) throw DomainError("log_partition_function: rows must be non-negative");
    const Engine e(geometry, {}, false);
    std::vector<double> r = e.initial();
    double log_scale = 0.0;
    for (int i = 0; i < rows; ++i) {
        e.t0->apply(r);
        const double m = max_abs(r);
        scale(r, 1.0 / m);
        log_scale += std::log(m);
    }
    return log_scale + std::log(dot(e.closing(), r));
}

double connectivity(const Geometry& geometry, int rows, Site z1, Site z2) {
    if (z1.row > z2.row) std::swap(z1, z2);
    for (const Site& z : {z1, z2}) {
        if (z.row < 0 || z.row > rows || z.column < 0 || z.column >= geometry.width_l)
            throw DomainError("connectivity: site outside the lattice");
    }
    const Engine e(geometry, {}, true);
    CorrelatorOptions opt;
    const Ends ends = make_ends(e, z1.row, rows - z2.row, opt);
    return two_point(e, ends, z1.column, z2.column, z2.row - z1.row).back();
}

CorrelatorSeries correlator(const Geometry& geometry, int u_max, const CorrelatorOptions& options) {
    if (u_max < 0) throw DomainError("correlator: u_max must be non-negative");
    const Engine e(geometry, options.cache_dir, true);
    const Ends ends = make_ends(e, options.end_rows, options.end_rows, options);
    const int c = geometry.middle_column();
    CorrelatorSeries out;
    out.values = two_point(e, ends, c, c, u_max);
    out.distances.resize(out.values.size());
    std::iota(out.distances.begin(), out.distances.end(), 0);
    if (options.end_rows < 0 && !std::isfinite(out.values.back()))
        throw ConvergenceError("correlator: non-finite values");
    return out;
}

AmplitudeGap amplitude_and_gap(const CorrelatorSeries& series, bool with_background) {
    const auto& c = series.values;
    const std::size_t n = c.size();
    if (n < 8) throw DomainError("amplitude_and_gap: series too short");
    auto u_of = [&](std::size_t i) { return series.distances.empty() ? static_cast<double>(i) : series.distances[i]; };
    auto spread = [](const std::vector<double>& v, std::size_t from) {
        const auto [lo, hi] = std::minmax_element(v.begin() + from, v.end());
        return *hi - *lo;
    };

    AmplitudeGap out;
    if (!with_background) {
        std::vector<double> m;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!(c[i] > 0.0 && c[i + 1] > 0.0)) throw DomainError("amplitude_and_gap: series must be positive");
            m.push_back(std::log(c[i] / c[i + 1]) / (u_of(i + 1) - u_of(i)));
        }
        const std::size_t from = m.size() - std::max<std::size_t>(2, m.size() / 4);
        out.gap = m.back();
        if (!(spread(m, from) <= 1e-8 * std::fabs(out.gap)))
            throw ConvergenceError("amplitude_and_gap: gap estimates have not stabilised");
        out.amplitude = c[n - 1] * std::exp(out.gap * u_of(n - 1));
        return out;
    }

    std::vector<double> b;
    for (std::size_t i = 0; i + 2 < n; ++i) {
        const double d1 = c[i + 2] - c[i + 1], d2 = c[i + 2] - 2.0 * c[i + 1] + c[i];
        b.push_back(d2 == 0.0 ? c[i + 2] : c[i + 2] - d1 * d1 / d2);
    }
    const std::size_t from = b.size() - std::max<std::size_t>(2, b.size() / 4);
    out.background = b.back();
    if (!(spread(b, from) <= 1e-8 * std::fabs(out.background)))
        throw ConvergenceError("amplitude_and_gap: background estimates have not stabilised");
    out.gap = std::nan("");
    for (std::size_t i = n - 1; i-- > 0;) {
        const double d0 = c[i] - out.background, d1 = c[i + 1] - out.background;
        if (std::fabs(d1) > 1e-6 * std::fabs(out.background) && d0 / d1 > 0.0) {
            out.gap = std::log(d0 / d1) / (u_of(i + 1) - u_of(i));
            out.amplitude = d1 * std::exp(out.gap * u_of(i + 1));
            break;
        }
    }
    return out;
}

LatticeRatio lattice_ratio(int width_l, double q, BoundaryCondition bc, const LatticeOptions& options) {
    if (width_l < 3 || width_l % 2 == 0) throw DomainError("lattice_ratio: width must be odd and at least 3");
    const Coupling c = Coupling::from_q(q);
    const int u_max = options.rows_per_width * width_l;

    LatticeRatio out;
    out.width_l = width_l;
    out.q = q;
    out.bc = bc;

    const auto cyl = amplitude_and_gap(correlator(Geometry::critical(width_l, Topology::cylinder, bc, q), u_max, options.correlator));
    const bool wired = bc == BoundaryCondition::wired;
    const auto strip = amplitude_and_gap(correlator(Geometry::critical(width_l, Topology::strip, bc, q), u_max, options.correlator), wired);

    out.amplitude_cylinder = cyl.amplitude;
    out.gap_cylinder = cyl.gap;
    out.amplitude_strip = wired ? strip.background : strip.amplitude;
    out.gap_strip = strip.gap;

    const double delta = weight(KacIndex::twice(0, 1), c);
    const double delta_b = wired ? 0.0 : weight(KacIndex::integer(3, 1), c);
    out.ratio = out.amplitude_cylinder / out.amplitude_strip * std::pow(2.0, 2.0 * delta_b - 8.0 * delta);
    return out;
}

BruteForceResult brute_force_oracle(const Geometry& geometry, int rows, Site z1, Site z2) {
    check_geometry(geometry);
    const int n = geometry.width_l;
    const int sites = (rows + 1) * n;
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r <= rows; ++r) {
        for (int j = 0; j + 1 < n; ++j) edges.emplace_back(r * n + j, r * n + j + 1);
        if (geometry.topology == Topology::cylinder) edges.emplace_back(r * n + n - 1, r * n);
        if (r < rows)
            for (int j = 0; j < n; ++j) edges.emplace_back(r * n + j, (r + 1) * n + j);
    }
    BruteForceResult out;
    out.edges = static_cast<int>(edges.size());
    if (out.edges > 26) throw CapacityError("brute_force_oracle: more than 26 edges");
    const int a = z1.row * n + z1.column, b = z2.row * n + z2.column;
    if (a < 0 || a >= sites || b < 0 || b >= sites) throw DomainError("brute_force_oracle: site outside the lattice");

    // Node `sites` stands for the wired boundary.
    const bool wired = geometry.wired();
    std::vector<int> parent(sites + 1);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<double> vpow(out.edges + 1), qpow(sites + 2);
    for (int k = 0; k <= out.edges; ++k) vpow[k] = std::pow(geometry.v_coupling, k);
    for (int k = 0; k <= sites + 1; ++k) qpow[k] = std::pow(geometry.q, k);

    const std::uint64_t total = std::uint64_t{1} << out.edges;
    long double z = 0.0L, connected = 0.0L;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        std::iota(parent.begin(), parent.end(), 0);
        if (wired)
            for (int r = 0; r <= rows; ++r) {
                parent[find(r * n)] = find(sites);
                parent[find(r * n + n - 1)] = find(sites);
            }
        int used = 0;
        for (int e = 0; e < out.edges; ++e) {
            if (!((mask >> e) & 1)) continue;
            ++used;
            const int x = find(edges[e].first), y = find(edges[e].second);
            if (x != y) parent[x] = y;
        }
        int clusters = 0;
        const int boundary = wired ? find(sites) : -1;
        for (int s = 0; s < sites; ++s)
            if (find(s) == s && s != boundary) ++clusters;
        double w = vpow[used];
        w *= wired ? geometry.q1 * qpow[clusters] : qpow[clusters];
        z += w;
        if (find(a) == find(b)) connected += w;
    }
    out.partition_function = static_cast<double>(z);
    out.connected_weight = static_cast<double>(connected);
    out.connectivity = static_cast<double>(connected / z);
    return out;
}

double ising_spin_correlator(const Geometry& geometry, int rows, Site z1, Site z2) {
    check_geometry(geometry);
    const int n = geometry.width_l;
    if (n > 16) throw CapacityError("ising_spin_correlator: width too large");
    const double k = 0.5 * std::log1p(geometry.v_coupling);
    const std::size_t dim = std::size_t{1} << n;
    auto spin = [](std::size_t cfg, int j) { return ((cfg >> j) & 1) ? -1.0 : 1.0; };
    auto allowed = [&](std::size_t cfg) {
        return !geometry.wired() || (spin(cfg, 0) > 0.0 && spin(cfg, n - 1) > 0.0);
    };
    std::vector<double> horizontal(dim);
    for (std::size_t cfg = 0; cfg < dim; ++cfg) {
        double e = 0.0;
        for (int j = 0; j + 1 < n; ++j) e += spin(cfg, j) * spin(cfg, j + 1);
        if (geometry.topology == Topology::cylinder) e += spin(cfg, n - 1) * spin(cfg, 0);
        horizontal[cfg] = allowed(cfg) ? std::exp(k * e) : 0.0;
    }
    std::vector<double> vertical(n + 1);
    for (int d = 0; d <= n; ++d) vertical[d] = std::exp(k * (n - 2 * d));

    auto run = [&](bool insert) {
        std::vector<double> psi(horizontal);
        double log_scale = 0.0;
        for (int r = 0;; ++r) {
            if (insert)
                for (std::size_t cfg = 0; cfg < dim; ++cfg) {
                    if (z1.row == r) psi[cfg] *= spin(cfg, z1.column);
                    if (z2.row == r) psi[cfg] *= spin(cfg, z2.column);
                }
            if (r == rows) break;
            std::vector<double> next(dim, 0.0);
            for (std::size_t to = 0; to < dim; ++to) {
                if (horizontal[to] == 0.0) continue;
                double acc = 0.0;
                for (std::size_t from = 0; from < dim; ++from)
                    acc += vertical[std::popcount(to ^ from)] * psi[from];
                next[to] = acc * horizontal[to];
            }
            const double m = max_abs(next);
            scale(next, 1.0 / m);
            log_scale += std::log(m);
            psi = std::move(next);
        }
        return std::pair{log_scale, std::accumulate(psi.begin(), psi.end(), 0.0)};
    };
    const auto [lz, z] = run(false);
    const auto [lc, cz] = run(true);
    return cz / z * std::exp(lc - lz);
}

}  // namespace loopcft
