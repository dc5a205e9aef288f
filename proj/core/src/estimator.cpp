#include "swent/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <queue>
#include <thread>
#include <utility>

#include "swent/parallel.hpp"

namespace swent {

int thread_count() {
    const char* env = std::getenv("SWENT_THREADS");
    long requested = 0;
    if (env != nullptr && *env != '\0') {
        char* end = nullptr;
        requested = std::strtol(env, &end, 10);
        if (end == env || requested < 0) requested = 0;
    }
    if (requested == 0) {
        unsigned hw = std::thread::hardware_concurrency();
        requested = hw == 0 ? 1 : static_cast<long>(std::min(hw, 16u));
    }
    return static_cast<int>(std::max(1L, requested));
}

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    const int workers = thread_count();
    if (workers <= 1 || n < 1024) {
        fn(0, n);
        return;
    }
    const std::size_t chunks = static_cast<std::size_t>(workers);
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t begin = c * step;
        const std::size_t end = std::min(n, begin + step);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace swent

namespace swent::estimator {

namespace {

constexpr int kMaxDim = 3;
constexpr int kMaxResolution = 512;
constexpr std::size_t kMaxLatticePoints = 262144; // 64^3

// Candidate lattice over the unit hypercube: per-axis coordinates i/(R-1).
struct Lattice {
    int n = 0;
    int res = 0;
    std::size_t points = 0;

    Lattice(int dim, int resolution) : n(dim), res(resolution) {
        points = 1;
        for (int a = 0; a < n; ++a) points *= static_cast<std::size_t>(res);
    }
};

// Separation of every pairwise lattice difference, indexed on the offset
// lattice [-(R-1), R-1]^n. sep(c, p) depends only on c - p by linearity, so
// one table serves every pair.
struct SeparationTable {
    int n = 0;
    int res = 0;
    int width = 0; // 2R - 1
    std::vector<double> sep;
};

// Separations above `cap` never enter a stencil, so the sample scan stops as
// soon as the running sup clears the cap; samples are visited latest-first
// because growth usually peaks near the horizon. The stored value is exact
// below the cap and +inf above it (identical either way for every eps <= cap).
SeparationTable
build_separation_table(const flow::SwitchedSystem& system, double T,
                       const EstimationConfig& config, double cap) {
    SeparationTable table;
    table.n = system.dim();
    table.res = config.grid_resolution;
    table.width = 2 * config.grid_resolution - 1;

    const auto grid = flow::sample_times(system, T, config.sample_density);
    const auto phis = flow::FlowPropagator(system).transitions(grid);

    std::size_t total = 1;
    for (int a = 0; a < table.n; ++a) total *= static_cast<std::size_t>(table.width);
    table.sep.assign(total, 0.0);

    const double denom = static_cast<double>(config.grid_resolution - 1);
    const int n = table.n;
    const int res = table.res;
    const int width = table.width;
    const double inf = std::numeric_limits<double>::infinity();

    // sep(d) = sep(-d); fill the upper half and mirror.
    const std::size_t half = total / 2; // center index: all offsets zero
    parallel_for(half + 1, [&](std::size_t begin, std::size_t end) {
        for (std::size_t flat = begin; flat < end; ++flat) {
            std::size_t rest = flat;
            double d[kMaxDim] = {0.0, 0.0, 0.0};
            for (int a = 0; a < n; ++a) {
                const int off = static_cast<int>(rest % static_cast<std::size_t>(width)) - (res - 1);
                rest /= static_cast<std::size_t>(width);
                // Division keeps exactly representable offsets exact (31/62 = 0.5).
                d[a] = static_cast<double>(off) / denom;
            }
            double sup = 0.0;
            auto visit = [&](const Eigen::MatrixXd& phi) {
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j) acc += phi(i, j) * d[j];
                    const double mag = std::abs(acc);
                    if (mag > sup) sup = mag;
                    if (std::isnan(mag)) sup = inf;
                }
                if (!(sup < cap)) {
                    sup = inf;
                    return true;
                }
                return false;
            };
            // t = 0 first (kills offsets already eps apart), then latest-first
            // (expansion peaks near the horizon).
            if (!visit(phis.front())) {
                for (std::size_t s = phis.size(); s-- > 1;) {
                    if (visit(phis[s])) break;
                }
            }
            table.sep[half + (half - flat)] = sup;
            table.sep[flat] = sup;
        }
    });
    return table;
}

// Stencil rows: for fixed cross-axis offsets the set {d1 : sep(d) < eps} is
// an interval (sup of |linear| is convex), stored as [lo, hi] in lattice
// steps. Row-major over (d2, d3) so covered spans are contiguous flat ranges.
struct StencilRow {
    std::int16_t d2 = 0;
    std::int16_t d3 = 0;
    std::int16_t lo = 0;
    std::int16_t hi = 0;
};

struct Stencil {
    std::vector<StencilRow> rows;
    std::size_t cells = 0;
};

Stencil stencil_rows(const SeparationTable& table, double eps) {
    Stencil st;
    const int n = table.n;
    const int res = table.res;
    const int width = table.width;
    const int span2 = n >= 2 ? width : 1;
    const int span3 = n >= 3 ? width : 1;
    for (int o3 = 0; o3 < span3; ++o3) {
        for (int o2 = 0; o2 < span2; ++o2) {
            int lo = width;
            int hi = -1;
            const std::size_t base =
                (static_cast<std::size_t>(o3) * static_cast<std::size_t>(span2) +
                 static_cast<std::size_t>(o2)) *
                static_cast<std::size_t>(width);
            for (int o1 = 0; o1 < width; ++o1) {
                if (table.sep[base + static_cast<std::size_t>(o1)] < eps) {
                    if (o1 < lo) lo = o1;
                    hi = o1;
                }
            }
            if (hi < 0) continue;
            StencilRow row;
            row.d2 = static_cast<std::int16_t>(o2 - (n >= 2 ? res - 1 : 0));
            row.d3 = static_cast<std::int16_t>(o3 - (n >= 3 ? res - 1 : 0));
            row.lo = static_cast<std::int16_t>(lo - (res - 1));
            row.hi = static_cast<std::int16_t>(hi - (res - 1));
            st.rows.push_back(row);
            st.cells += static_cast<std::size_t>(hi - lo + 1);
        }
    }
    return st;
}

// Visit the flat index ranges the stencil induces around lattice point idx,
// clipped to the cube. Rows map to contiguous flat spans because axis 1 is
// the fastest-varying index.
template <typename Fn>
inline void
for_each_span(const Lattice& lat, std::size_t idx, int c1, int c2, int c3,
              const Stencil& st, const Fn& fn) {
    const int res = lat.res;
    const std::ptrdiff_t stride2 = res;
    const std::ptrdiff_t stride3 = static_cast<std::ptrdiff_t>(res) * res;
    for (const StencilRow& row : st.rows) {
        const int r2 = c2 + row.d2;
        const int r3 = c3 + row.d3;
        if (lat.n >= 2 && (r2 < 0 || r2 >= res)) continue;
        if (lat.n >= 3 && (r3 < 0 || r3 >= res)) continue;
        const int lo = std::max(0, c1 + row.lo);
        const int hi = std::min(res - 1, c1 + row.hi);
        if (lo > hi) continue;
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(idx) +
                                    (r2 - c2) * stride2 + (r3 - c3) * stride3 +
                                    (lo - c1);
        fn(static_cast<std::size_t>(base), static_cast<std::size_t>(hi - lo) + 1);
    }
}

struct Coords {
    int c1 = 0, c2 = 0, c3 = 0;
};

inline Coords coords_of(const Lattice& lat, std::size_t idx) {
    Coords c;
    c.c1 = static_cast<int>(idx % static_cast<std::size_t>(lat.res));
    idx /= static_cast<std::size_t>(lat.res);
    c.c2 = static_cast<int>(idx % static_cast<std::size_t>(lat.res));
    idx /= static_cast<std::size_t>(lat.res);
    c.c3 = static_cast<int>(idx);
    return c;
}

// Lazy greedy cover: gains only decrease as points get covered, so a stale
// max-heap with on-demand re-evaluation selects exactly the
// highest-gain / lowest-index candidate each round without per-cover updates.
long long greedy_cover(const Lattice& lat, const Stencil& st) {
    if (st.rows.empty()) {
        throw LatticeTooCoarse(
            "no lattice point covers any lattice point at this (T, eps); "
            "increase grid_resolution or shrink the horizon");
    }
    const std::size_t m = lat.points;
    std::vector<std::uint8_t> covered(m, 0);

    // Initial gains: along each candidate line the clipped overlap of a
    // stencil row is a trapezoid of c1, so summing slope changes costs
    // O(rows + R) per line instead of O(cells).
    std::vector<std::int32_t> gain(m, 0);
    {
        const int res = lat.res;
        const int lines2 = lat.n >= 2 ? res : 1;
        const int lines3 = lat.n >= 3 ? res : 1;
        std::vector<std::int32_t> slope(static_cast<std::size_t>(res) + 1);
        for (int c3 = 0; c3 < lines3; ++c3) {
            for (int c2 = 0; c2 < lines2; ++c2) {
                std::fill(slope.begin(), slope.end(), 0);
                std::int64_t v0 = 0;
                // f(c1) - f(c1-1) = 1[0 <= c1+hi <= R-1] - 1[0 <= c1+lo-1 <= R-1];
                // contributions at c1 <= 0 fold into the exact f(0).
                auto mark = [&](int sign, int a, int b) {
                    const int lo = std::max(1, a);
                    const int hi = std::min(res - 1, b);
                    if (lo > hi) return;
                    slope[static_cast<std::size_t>(lo)] += sign;
                    slope[static_cast<std::size_t>(hi + 1)] -= sign;
                };
                for (const StencilRow& row : st.rows) {
                    const int r2 = c2 + row.d2;
                    const int r3 = c3 + row.d3;
                    if (lat.n >= 2 && (r2 < 0 || r2 >= res)) continue;
                    if (lat.n >= 3 && (r3 < 0 || r3 >= res)) continue;
                    const int lo0 = std::max(0, static_cast<int>(row.lo));
                    const int hi0 = std::min(res - 1, static_cast<int>(row.hi));
                    if (lo0 <= hi0) v0 += hi0 - lo0 + 1;
                    mark(+1, -row.hi, res - 1 - row.hi);
                    mark(-1, 1 - row.lo, res - row.lo);
                }
                const std::size_t base =
                    (static_cast<std::size_t>(c3) * static_cast<std::size_t>(lines2) +
                     static_cast<std::size_t>(c2)) *
                    static_cast<std::size_t>(res);
                std::int64_t value = v0;
                std::int64_t running = 0;
                for (int c1 = 0; c1 < res; ++c1) {
                    if (c1 > 0) {
                        running += slope[static_cast<std::size_t>(c1)];
                        value += running;
                    }
                    gain[base + static_cast<std::size_t>(c1)] =
                        static_cast<std::int32_t>(value);
                }
            }
        }
    }

    // Max gain first; ties resolve to the lowest lattice index.
    auto worse = [](const std::pair<std::int32_t, std::size_t>& a,
                    const std::pair<std::int32_t, std::size_t>& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
    };
    std::priority_queue<std::pair<std::int32_t, std::size_t>,
                        std::vector<std::pair<std::int32_t, std::size_t>>,
                        decltype(worse)>
        heap(worse);
    for (std::size_t c = 0; c < m; ++c) heap.emplace(gain[c], c);

    long long selected = 0;
    std::size_t uncovered = m;
    while (uncovered > 0) {
        if (heap.empty()) {
            throw LatticeTooCoarse("greedy cover stalled with uncovered lattice points");
        }
        auto [key, c] = heap.top();
        heap.pop();
        const Coords cc = coords_of(lat, c);
        std::int32_t fresh = 0;
        for_each_span(lat, c, cc.c1, cc.c2, cc.c3, st,
                      [&](std::size_t base, std::size_t len) {
                          for (std::size_t p = base; p < base + len; ++p) {
                              fresh += covered[p] == 0;
                          }
                      });
        if (fresh == 0) continue;
        if (!heap.empty() && worse(std::make_pair(fresh, c), heap.top())) {
            heap.emplace(fresh, c);
            continue;
        }
        ++selected;
        for_each_span(lat, c, cc.c1, cc.c2, cc.c3, st,
                      [&](std::size_t base, std::size_t len) {
                          for (std::size_t p = base; p < base + len; ++p) {
                              if (covered[p] == 0) {
                                  covered[p] = 1;
                                  --uncovered;
                              }
                          }
                      });
    }
    return selected;
}

long long greedy_pack(const Lattice& lat, const Stencil& st) {
    const std::size_t m = lat.points;
    std::vector<std::uint8_t> blocked(m, 0);
    long long selected = 0;
    for (std::size_t p = 0; p < m; ++p) {
        if (blocked[p]) continue;
        ++selected;
        const Coords cc = coords_of(lat, p);
        for_each_span(lat, p, cc.c1, cc.c2, cc.c3, st,
                      [&](std::size_t base, std::size_t len) {
                          std::fill(blocked.begin() + static_cast<std::ptrdiff_t>(base),
                                    blocked.begin() + static_cast<std::ptrdiff_t>(base + len),
                                    std::uint8_t{1});
                      });
    }
    return selected;
}

void check_eps(double eps) {
    if (!(eps > 0.0)) {
        throw std::invalid_argument("estimator: eps must be positive");
    }
}

} // namespace

void EstimationConfig::validate(int dim, bool for_rate_fit) const {
    if (dim < 1 || dim > kMaxDim) {
        throw std::invalid_argument("estimation config: state dimension must be 1..3");
    }
    if (grid_resolution < 3 || grid_resolution > kMaxResolution) {
        throw std::invalid_argument("estimation config: grid_resolution must lie in 3..512");
    }
    std::size_t points = 1;
    for (int a = 0; a < dim; ++a) points *= static_cast<std::size_t>(grid_resolution);
    if (points > kMaxLatticePoints) {
        throw std::invalid_argument(
            "estimation config: grid_resolution too large for this dimension "
            "(lattice capped at 64^3 points)");
    }
    if (sample_density < 1) {
        throw std::invalid_argument("estimation config: sample_density must be >= 1");
    }
    const std::size_t min_horizons = for_rate_fit ? 3 : 1;
    if (horizons.size() < min_horizons) {
        throw std::invalid_argument(for_rate_fit
                                        ? "estimation config: need at least 3 horizons"
                                        : "estimation config: need at least 1 horizon");
    }
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (!(horizons[i] > 0.0)) {
            throw std::invalid_argument("estimation config: horizons must be positive");
        }
        if (i > 0 && !(horizons[i] > horizons[i - 1])) {
            throw std::invalid_argument("estimation config: horizons must be increasing");
        }
    }
    const std::size_t min_eps = for_rate_fit ? 2 : 1;
    if (epsilons.size() < min_eps) {
        throw std::invalid_argument(for_rate_fit
                                        ? "estimation config: need at least 2 epsilons"
                                        : "estimation config: need at least 1 epsilon");
    }
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0) || !(epsilons[i] < 1.0)) {
            throw std::invalid_argument("estimation config: epsilons must lie in (0,1)");
        }
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
            throw std::invalid_argument("estimation config: epsilons must be decreasing");
        }
    }
}

long long spanning_count(const flow::SwitchedSystem& system, double T, double eps,
                         const EstimationConfig& config) {
    config.validate(system.dim());
    check_eps(eps);
    const auto table = build_separation_table(system, T, config, eps);
    const Lattice lat(system.dim(), config.grid_resolution);
    return greedy_cover(lat, stencil_rows(table, eps));
}

long long separated_count(const flow::SwitchedSystem& system, double T, double eps,
                          const EstimationConfig& config) {
    config.validate(system.dim());
    check_eps(eps);
    const auto table = build_separation_table(system, T, config, eps);
    const Lattice lat(system.dim(), config.grid_resolution);
    return greedy_pack(lat, stencil_rows(table, eps));
}

long long grid_formula_count(const flow::SwitchedSystem& system,
                             const lie::StructureReport& structure, double T,
                             double eps) {
    check_eps(eps);
    if (system.dim() > 1 &&
        structure.classification != lie::Classification::commuting_diagonalizable) {
        throw std::invalid_argument(
            "grid_formula_count: requires a diagonal (or scalar) system");
    }
    if (!system.signal.periodic()) {
        // Exact per-period fractions are what make the closed form exact.
        throw std::invalid_argument("grid_formula_count: requires a periodic signal");
    }
    const int n = system.dim();
    const int k = system.mode_count();

    // Per-coordinate rates: real parts of the transformed diagonals.
    std::vector<std::vector<double>> rates(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(k)));
    for (int j = 0; j < k; ++j) {
        const auto& t = structure.transformed_modes[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            rates[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t(i, i).real();
        }
    }

    // kappa_i is piecewise linear, so its running max sits on the change grid.
    std::vector<double> grid{0.0};
    for (double c : system.signal.change_instants(T)) {
        if (c < T) grid.push_back(c);
    }
    grid.push_back(T);

    long double total = 1.0L;
    for (int i = 0; i < n; ++i) {
        double peak = 0.0;
        for (double t : grid) {
            peak = std::max(peak, signals::kappa(system.signal,
                                                 rates[static_cast<std::size_t>(i)], t));
        }
        const long double along =
            std::ceil(std::max(1.0L, static_cast<long double>(std::exp(peak))) /
                      (2.0L * static_cast<long double>(eps)));
        total *= along;
        if (total > 4e18L) {
            throw std::overflow_error("grid_formula_count: count exceeds 64-bit range");
        }
    }
    return static_cast<long long>(total);
}

EstimationResult entropy_rate(const flow::SwitchedSystem& system,
                              const EstimationConfig& config) {
    config.validate(system.dim(), true);
    EstimationResult result;
    result.horizons = config.horizons;
    result.epsilons = config.epsilons;
    const std::size_t ne = config.epsilons.size();
    const std::size_t nt = config.horizons.size();
    result.counts.assign(ne, std::vector<long long>(nt, 0));

    if (config.method == Method::grid_formula) {
        const auto structure = lie::classify(system.modes);
        for (std::size_t ti = 0; ti < nt; ++ti) {
            for (std::size_t ei = 0; ei < ne; ++ei) {
                result.counts[ei][ti] =
                    grid_formula_count(system, structure, config.horizons[ti],
                                       config.epsilons[ei]);
            }
        }
    } else {
        const Lattice lat(system.dim(), config.grid_resolution);
        for (std::size_t ti = 0; ti < nt; ++ti) {
            // One table per horizon; every eps reuses it (cap = largest eps).
            const auto table = build_separation_table(system, config.horizons[ti],
                                                      config, config.epsilons.front());
            for (std::size_t ei = 0; ei < ne; ++ei) {
                const auto stencil = stencil_rows(table, config.epsilons[ei]);
                result.counts[ei][ti] = config.method == Method::spanning_greedy
                                            ? greedy_cover(lat, stencil)
                                            : greedy_pack(lat, stencil);
            }
        }
    }

    // Least-squares slope of log count vs T over the tail half of horizons;
    // the transient before the fitted window is discarded.
    const std::size_t tail = std::max<std::size_t>(2, (nt + 1) / 2);
    const std::size_t first = nt - tail;
    result.slopes.resize(ne);
    result.residuals.resize(ne);
    for (std::size_t ei = 0; ei < ne; ++ei) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t ti = first; ti < nt; ++ti) {
            const double x = config.horizons[ti];
            const double y = std::log(static_cast<double>(result.counts[ei][ti]));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double m = static_cast<double>(tail);
        const double denom = m * sxx - sx * sx;
        if (!(std::abs(denom) > 0.0)) {
            throw std::invalid_argument("entropy_rate: degenerate fit window");
        }
        const double slope = (m * sxy - sx * sy) / denom;
        const double intercept = (sy - slope * sx) / m;
        double rss = 0.0;
        for (std::size_t ti = first; ti < nt; ++ti) {
            const double y = std::log(static_cast<double>(result.counts[ei][ti]));
            const double r = y - (intercept + slope * config.horizons[ti]);
            rss += r * r;
        }
        result.slopes[ei] = slope;
        result.residuals[ei] = std::sqrt(rss / m);
    }
    result.rate = result.slopes.back(); // epsilons are decreasing
    return result;
}

} // namespace swent::estimator
