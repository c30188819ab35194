#include "seedbank/geometry.hpp"
#include "seedbank/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace seedbank {

// ---------------------------------------------------------------------------------
// Geography

Geography::Geography(GeographyFamily f, int digits, int modulus, int radius)
    : family_(f), digits_(digits), modulus_(modulus), radius_(radius) {
    double size = std::pow(static_cast<double>(modulus), digits);
    if (size > 1 << 26) throw std::invalid_argument("geography too large: " + std::to_string(size) + " sites");
    size_ = 1;
    stride_.resize(static_cast<std::size_t>(digits));
    for (int k = 0; k < digits; ++k) {
        stride_[static_cast<std::size_t>(k)] = static_cast<Site>(size_);
        size_ *= static_cast<std::size_t>(modulus);
    }
}

Geography Geography::torus(int dimension, int radius) {
    if (dimension < 1) throw std::invalid_argument("torus dimension must be >= 1");
    if (radius < 1) throw std::invalid_argument("torus radius n must be >= 1");
    return Geography(GeographyFamily::Torus, dimension, 2 * radius, radius);
}

Geography Geography::hierarchical(int order, int radius) {
    if (order < 2) throw std::invalid_argument("hierarchical order N must be >= 2");
    if (radius < 1) throw std::invalid_argument("hierarchical radius n must be >= 1");
    return Geography(GeographyFamily::Hierarchical, radius, order, radius);
}

Geography Geography::cycle(int sites) {
    if (sites < 1) throw std::invalid_argument("cycle needs at least one site");
    return Geography(GeographyFamily::Torus, 1, sites, sites / 2);
}

int Geography::digit(Site s, int k) const {
    return static_cast<int>((s / stride_[static_cast<std::size_t>(k)]) % static_cast<Site>(modulus_));
}

std::vector<int> Geography::decode(Site s) const {
    if (s >= size_) throw std::out_of_range("site label out of range");
    std::vector<int> out(static_cast<std::size_t>(digits_));
    for (int k = 0; k < digits_; ++k) {
        const int idx = family_ == GeographyFamily::Torus ? digits_ - 1 - k : k;
        out[static_cast<std::size_t>(idx)] = digit(s, k);
    }
    return out;
}

Site Geography::encode(std::span<const int> coords) const {
    if (static_cast<int>(coords.size()) != digits_) throw std::invalid_argument("coordinate count mismatch");
    Site s = 0;
    for (int k = 0; k < digits_; ++k) {
        const int idx = family_ == GeographyFamily::Torus ? digits_ - 1 - k : k;
        int c = coords[static_cast<std::size_t>(idx)] % modulus_;
        if (c < 0) c += modulus_;
        s += static_cast<Site>(c) * stride_[static_cast<std::size_t>(k)];
    }
    return s;
}

Site Geography::add(Site a, Site b) const {
    const auto m = static_cast<Site>(modulus_);
    if (digits_ == 1) return (a + b) % m;
    if (m == 2) return a ^ b;
    Site s = 0;
    for (int k = digits_ - 1; k >= 0; --k) {
        const Site st = stride_[static_cast<std::size_t>(k)];
        const Site da = a / st, db = b / st;
        a -= da * st;
        b -= db * st;
        s += ((da + db) % m) * st;
    }
    return s;
}

Site Geography::neg(Site a) const {
    const auto m = static_cast<Site>(modulus_);
    if (digits_ == 1) return (m - a % m) % m;
    if (m == 2) return a;
    Site s = 0;
    for (int k = digits_ - 1; k >= 0; --k) {
        const Site st = stride_[static_cast<std::size_t>(k)];
        const Site da = a / st;
        a -= da * st;
        s += ((m - da) % m) * st;
    }
    return s;
}

int Geography::hierarchical_distance(Site a, Site b) const {
    if (family_ != GeographyFamily::Hierarchical) throw std::logic_error("hierarchical_distance on a torus");
    for (int k = digits_ - 1; k >= 0; --k)
        if (digit(a, k) != digit(b, k)) return k + 1;
    return 0;
}

std::vector<int> Geography::centred_coordinates(Site s) const {
    if (family_ != GeographyFamily::Torus) throw std::logic_error("centred_coordinates on a hierarchy");
    auto c = decode(s);
    for (int& v : c)
        if (2 * v > modulus_) v -= modulus_;
    return c;
}

std::string Geography::describe() const {
    std::ostringstream os;
    if (family_ == GeographyFamily::Torus)
        os << "torus(d=" << digits_ << ", side=" << modulus_ << ")";
    else
        os << "hierarchical(N=" << modulus_ << ", n=" << digits_ << ")";
    return os.str();
}

// ---------------------------------------------------------------------------------
// Kernels

std::string kernel_name(const KernelSpec& spec) {
    struct V {
        std::string operator()(const NearestNeighbour&) const { return "nearest_neighbour"; }
        std::string operator()(const HeavyTail&) const { return "heavy_tail"; }
        std::string operator()(const HierarchicalRates&) const { return "hierarchical"; }
    };
    return std::visit(V{}, spec);
}

MigrationKernel::MigrationKernel(Geography geo, std::vector<double> row, bool truncated)
    : geo_(std::move(geo)), row_(std::move(row)), truncated_(truncated) {
    if (row_.size() != geo_.size()) throw std::invalid_argument("kernel row length differs from geography size");
    for (double r : row_)
        if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("kernel rates must be finite and >= 0");
    finalize();
}

void MigrationKernel::finalize() {
    support_.clear();
    double total = 0.0, carry = 0.0;
    for (Site j = 1; j < row_.size(); ++j) {
        if (row_[j] > 0.0) support_.push_back({j, row_[j]});
        // Neumaier summation keeps heavy-tail rows accurate.
        const double t = total + row_[j];
        carry += std::abs(total) >= row_[j] ? (total - t) + row_[j] : (row_[j] - t) + total;
        total = t;
    }
    total_rate_ = total + carry;
    total_mass_ = total_rate_ + row_[0];
    symmetric_ = true;
    for (Site j = 1; j < row_.size() && symmetric_; ++j)
        if (row_[j] != row_[geo_.neg(j)]) symmetric_ = false;
}

MigrationKernel MigrationKernel::identity(const Geography& geo) {
    std::vector<double> row(geo.size(), 0.0);
    row[0] = 1.0;
    return MigrationKernel(geo, std::move(row));
}

MigrationKernel MigrationKernel::zero(const Geography& geo) {
    return MigrationKernel(geo, std::vector<double>(geo.size(), 0.0));
}

MigrationKernel MigrationKernel::uniform_jump(const Geography& geo, double rate) {
    return MigrationKernel(geo, std::vector<double>(geo.size(), rate / static_cast<double>(geo.size())));
}

MigrationKernel MigrationKernel::symmetrized() const {
    std::vector<double> row(row_.size());
    for (Site j = 0; j < row_.size(); ++j) row[j] = 0.5 * (row_[j] + row_[geo_.neg(j)]);
    MigrationKernel k(geo_, std::move(row), truncated_);
    k.fold_error_ = fold_error_;
    k.infinite_total_ = infinite_total_;
    k.fold_shells_ = fold_shells_;
    return k;
}

namespace {

struct FoldSum {
    double value = 0.0;
    double error = 0.0; // absolute bound
    std::size_t shells = 0;
};

// sum_{m >= 0} (a + m L)^{-s}: direct shells, then an Euler-Maclaurin tail. The
// remainder after the f''' correction is bounded by the magnitude of the next term
// because all derivatives of the summand are monotone with alternating signs.
FoldSum power_lattice_sum(double a, double L, double s, double relative_epsilon, std::size_t cap) {
    FoldSum out;
    double sum = 0.0, carry = 0.0;
    std::size_t m = 0;
    auto f = [&](double x) { return std::pow(a + L * x, -s); };
    for (; m < cap; ++m) {
        const double term = f(static_cast<double>(m));
        const double t = sum + term;
        carry += std::abs(sum) >= term ? (sum - t) + term : (term - t) + sum;
        sum = t;
        // Omitted mass is at most the integral from m to infinity.
        const double omitted = std::pow(a + L * static_cast<double>(m), 1.0 - s) / (L * (s - 1.0));
        if (omitted < relative_epsilon * 1e-3 * (sum + carry)) {
            ++m;
            break;
        }
    }
    const double X = static_cast<double>(m);
    const double u = a + L * X;
    // derivatives f^{(k)}(X) = (-1)^k s(s+1)...(s+k-1) L^k u^{-s-k}
    const double f0 = std::pow(u, -s);
    const double f1 = -s * L * std::pow(u, -s - 1);
    const double f3 = -s * (s + 1) * (s + 2) * L * L * L * std::pow(u, -s - 3);
    const double f5 = -s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * std::pow(L, 5) * std::pow(u, -s - 5);
    const double integral = std::pow(u, 1.0 - s) / (L * (s - 1.0));
    const double tail = integral + 0.5 * f0 - f1 / 12.0 + f3 / 720.0;
    out.value = sum + carry + tail;
    out.error = std::abs(f5) / 30240.0 + 4.0 * std::numeric_limits<double>::epsilon() * out.value;
    out.shells = m;
    return out;
}

} // namespace

std::optional<double> infinite_lattice_total_rate(const Geography& geo, const KernelSpec& spec) {
    if (auto nn = std::get_if<NearestNeighbour>(&spec)) return 2.0 * geo.dimension() * nn->rate;
    if (auto ht = std::get_if<HeavyTail>(&spec)) return 2.0 * ht->Q * boost::math::zeta(1.0 + ht->q);
    const auto& h = std::get<HierarchicalRates>(spec);
    const double N = geo.modulus(), r = h.c / N;
    // sum_k (c/N)^{k-1} (1 - N^{-k})
    return 1.0 / (1.0 - r) - (1.0 / N) / (1.0 - r / N);
}

MigrationKernel build_kernel(const Geography& geo, const KernelSpec& spec, const KernelOptions& opt) {
    const std::size_t G = geo.size();
    std::vector<double> row(G, 0.0);
    double fold_error = 0.0;
    std::size_t shells = 0;
    bool truncated = false;

    if (auto nn = std::get_if<NearestNeighbour>(&spec)) {
        if (geo.family() != GeographyFamily::Torus)
            throw std::invalid_argument("nearest-neighbour kernel needs a torus geography");
        if (!(nn->rate >= 0.0)) throw std::invalid_argument("nearest-neighbour rate must be >= 0");
        std::vector<int> c(static_cast<std::size_t>(geo.dimension()), 0);
        for (int k = 0; k < geo.dimension(); ++k) {
            for (int sgn : {+1, -1}) {
                std::fill(c.begin(), c.end(), 0);
                c[static_cast<std::size_t>(k)] = sgn;
                row[geo.encode(c)] += nn->rate;
            }
        }
    } else if (auto ht = std::get_if<HeavyTail>(&spec)) {
        if (geo.family() != GeographyFamily::Torus)
            throw std::invalid_argument("heavy-tail kernel is undefined on a hierarchical geography");
        if (geo.dimension() != 1) throw std::invalid_argument("heavy-tail kernel is implemented on 1-D tori only");
        if (!(ht->q > 0.0 && ht->q < 2.0)) throw std::invalid_argument("heavy-tail exponent q must lie in (0,2)");
        if (!(ht->Q > 0.0)) throw std::invalid_argument("heavy-tail amplitude Q must be > 0");
        const double s = 1.0 + ht->q;
        const auto L = static_cast<double>(geo.modulus());
        if (opt.fold) {
            truncated = true;
            double err = 0.0;
            for (Site j = 0; j < G; ++j) {
                FoldSum a, b;
                if (j == 0) {
                    a = power_lattice_sum(L, L, s, opt.fold_epsilon, opt.shell_cap);
                    b = a;
                } else {
                    a = power_lattice_sum(static_cast<double>(j), L, s, opt.fold_epsilon, opt.shell_cap);
                    b = power_lattice_sum(L - static_cast<double>(j), L, s, opt.fold_epsilon, opt.shell_cap);
                }
                row[j] = ht->Q * (a.value + b.value);
                err += ht->Q * (a.error + b.error);
                shells = std::max({shells, a.shells, b.shells});
            }
            fold_error = err / (*infinite_lattice_total_rate(geo, spec));
        } else {
            for (Site j = 1; j < G; ++j) {
                const int k = geo.centred_coordinates(j)[0];
                row[j] = ht->Q * std::pow(std::abs(static_cast<double>(k)), -s);
            }
        }
    } else {
        const auto& h = std::get<HierarchicalRates>(spec);
        if (geo.family() != GeographyFamily::Hierarchical)
            throw std::invalid_argument("hierarchical rates need a hierarchical geography");
        const double N = geo.modulus();
        if (!(h.c > 0.0)) throw std::invalid_argument("hierarchical growth base c must be > 0");
        if (!(h.c < N)) throw std::invalid_argument("hierarchical growth base c must satisfy c < N");
        const int n = geo.radius();
        const double r = h.c / N;
        // level l contributes (c/N)^{l-1} N^{-l} to each site of the l-ball
        auto level_rate = [&](int l) { return std::pow(r, l - 1) * std::pow(N, -l); };
        for (Site j = 0; j < G; ++j) {
            const int dist = geo.hierarchical_distance(0, j);
            double v = 0.0;
            if (opt.fold) {
                // levels inside the ball map injectively; levels l > n wrap N^{l-n} times
                if (j != 0)
                    for (int l = std::max(dist, 1); l <= n; ++l) v += level_rate(l);
                const double outer = std::pow(r, n) / (1.0 - r) * std::pow(N, -n); // sum_{l>n} (c/N)^{l-1} N^{-n}
                if (j != 0) {
                    v += outer;
                } else {
                    // (N^{l-n} - 1) (c/N)^{l-1} N^{-l} summed over l > n
                    const double inner = std::pow(r, n) * std::pow(N, -(n + 1)) / (1.0 - r / N);
                    v += outer - inner;
                }
                truncated = true;
            } else if (j != 0) {
                // the infinite-lattice rate sum_{l >= dist} (c/N)^{l-1} N^{-l}
                v = level_rate(dist) / (1.0 - r / N);
            }
            row[j] = v;
        }
    }

    MigrationKernel k(geo, std::move(row), truncated);
    k.fold_error_ = fold_error;
    k.fold_shells_ = shells;
    k.infinite_total_ = infinite_lattice_total_rate(geo, spec);
    if (opt.symmetrize) {
        MigrationKernel s = k.symmetrized();
        return s;
    }
    return k;
}

// ---------------------------------------------------------------------------------
// Transition probabilities

std::vector<double> convolve(const Geography& geo, std::span<const double> p, std::span<const double> q) {
    const std::size_t G = geo.size();
    std::vector<double> out(G, 0.0);
    for (Site i = 0; i < G; ++i) {
        const double pi = p[i];
        if (pi == 0.0) continue;
        for (Site k = 0; k < G; ++k) out[geo.add(i, k)] += pi * q[k];
    }
    return out;
}

double uniform_deviation(std::span<const double> p) {
    const double G = static_cast<double>(p.size());
    double dev = 0.0;
    for (double v : p) dev = std::max(dev, std::abs(G * v - 1.0));
    return dev;
}

namespace {

// Uniformisation of a_t(0, .) with Poisson truncation tail <= tol.
TransitionRow uniformise(const MigrationKernel& kernel, double t, double tol) {
    const Geography& geo = kernel.geography();
    const std::size_t G = geo.size();
    TransitionRow out;
    out.p.assign(G, 0.0);
    const double lambda = kernel.total_rate();
    if (t == 0.0 || lambda == 0.0) {
        out.p[0] = 1.0;
        return out;
    }
    const double mean = lambda * t;
    std::size_t kmax = static_cast<std::size_t>(mean + 10.0 * std::sqrt(mean) + 20.0);
    while (boost::math::gamma_p(static_cast<double>(kmax + 1), mean) > tol) kmax += 1 + kmax / 4;
    out.error_bound = boost::math::gamma_p(static_cast<double>(kmax + 1), mean);

    const auto& support = kernel.support();
    std::vector<double> v(G, 0.0), next(G, 0.0);
    v[0] = 1.0;
    double logw = -mean;
    for (std::size_t k = 0; k <= kmax; ++k) {
        if (k > 0) {
            logw += std::log(mean) - std::log(static_cast<double>(k));
            std::fill(next.begin(), next.end(), 0.0);
            for (Site i = 0; i < G; ++i) {
                const double vi = v[i];
                if (vi == 0.0) continue;
                for (const auto& e : support) next[geo.add(i, e.offset)] += vi * e.rate / lambda;
            }
            std::swap(v, next);
        }
        const double w = std::exp(logw);
        if (w == 0.0) continue;
        for (Site j = 0; j < G; ++j) out.p[j] += w * v[j];
    }
    return out;
}

} // namespace

TransitionRow transition_row(const MigrationKernel& kernel, double t, std::size_t size_cap) {
    if (!(t >= 0.0)) throw std::invalid_argument("transition time must be >= 0");
    if (kernel.geography().size() > size_cap)
        throw std::invalid_argument("exact transition probabilities refused: geography has " +
                                    std::to_string(kernel.geography().size()) + " sites, cap is " +
                                    std::to_string(size_cap));
    const double lambda = kernel.total_rate();
    int squarings = 0;
    double tau = t;
    while (lambda * tau > 64.0) {
        tau *= 0.5;
        ++squarings;
    }
    const double tol = 1e-11 / std::ldexp(1.0, squarings);
    TransitionRow row = uniformise(kernel, tau, tol);
    for (int s = 0; s < squarings; ++s) {
        row.p = convolve(kernel.geography(), row.p, row.p);
        row.error_bound *= 2.0;
    }
    return row;
}

TransitionEstimate transition_probability(const MigrationKernel& kernel, double t, Site i, Site j,
                                          TransitionMethod method, std::size_t replicas, std::uint64_t seed,
                                          std::size_t size_cap) {
    const Geography& geo = kernel.geography();
    if (i >= geo.size() || j >= geo.size()) throw std::out_of_range("site label out of range");
    if (method == TransitionMethod::Exact) {
        const TransitionRow row = transition_row(kernel, t, size_cap);
        return {row.p[geo.sub(j, i)], row.error_bound, TransitionMethod::Exact};
    }
    if (!(t >= 0.0)) throw std::invalid_argument("transition time must be >= 0");
    if (replicas < 2) throw std::invalid_argument("Monte Carlo needs at least 2 replicas");
    const auto& support = kernel.support();
    std::vector<double> weights;
    for (const auto& e : support) weights.push_back(e.rate);
    const double lambda = kernel.total_rate();
    Rng rng = make_rng(seed, 0, "transition");
    std::size_t hits = 0;
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::exponential_distribution<double> hold(lambda > 0 ? lambda : 1.0);
    for (std::size_t r = 0; r < replicas; ++r) {
        Site pos = i;
        if (lambda > 0) {
            double clock = hold(rng);
            while (clock <= t) {
                pos = geo.add(pos, support[pick(rng)].offset);
                clock += hold(rng);
            }
        }
        if (pos == j) ++hits;
    }
    const double p = static_cast<double>(hits) / static_cast<double>(replicas);
    return {p, std::sqrt(std::max(p * (1 - p), 1.0 / static_cast<double>(replicas)) / static_cast<double>(replicas)),
            TransitionMethod::MonteCarlo};
}

MixingResult estimate_mixing_time(const MigrationKernel& kernel, double epsilon, const MixingOptions& opt) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("mixing tolerance must be > 0");
    const Geography& geo = kernel.geography();
    if (geo.size() > opt.size_cap) throw std::invalid_argument("mixing-time estimate refused above the size cap");
    MixingResult res;
    if (geo.size() == 1) return res;
    const double lambda = kernel.total_rate();
    if (lambda == 0.0) throw NumericalFailure("mixing time: kernel has no jumps, the walk is reducible");

    // Geometric grid t_k = t0 2^k; rows on the grid come from repeated squaring and are
    // kept so that bisection inside a cell can reuse them (t_{k-1} + t_{k-1-j}).
    const double t0 = 1.0 / lambda;
    std::vector<std::vector<double>> grid;
    grid.push_back(uniformise(kernel, t0, 1e-13).p);
    std::size_t k = 0;
    while (uniform_deviation(grid[k]) > epsilon) {
        if (t0 * std::ldexp(1.0, static_cast<int>(k)) > opt.horizon)
            throw NumericalFailure("mixing time: deviation " + std::to_string(uniform_deviation(grid[k])) +
                                   " still above tolerance at the horizon " + std::to_string(opt.horizon));
        grid.push_back(convolve(geo, grid[k], grid[k]));
        ++k;
    }
    res.grid_cells = k + 1;

    double lo_t = 0.0;
    std::vector<double> lo_p(geo.size(), 0.0);
    lo_p[0] = 1.0;
    double hi_t = t0 * std::ldexp(1.0, static_cast<int>(k));
    double hi_dev = uniform_deviation(grid[k]);
    if (k > 0) {
        lo_t = hi_t * 0.5;
        lo_p = grid[k - 1];
    }
    double half = (hi_t - lo_t) * 0.5;
    int level = static_cast<int>(k) - 2; // grid index holding the row at `half`
    while (half > opt.relative_resolution * hi_t) {
        std::vector<double> half_p = level >= 0 ? grid[static_cast<std::size_t>(level)] : uniformise(kernel, half, 1e-13).p;
        std::vector<double> mid_p = convolve(geo, lo_p, half_p);
        const double dev = uniform_deviation(mid_p);
        if (dev <= epsilon) {
            hi_t = lo_t + half;
            hi_dev = dev;
        } else {
            lo_t += half;
            lo_p = std::move(mid_p);
        }
        half *= 0.5;
        --level;
    }
    res.time = hi_t;
    res.deviation = hi_dev;
    return res;
}

std::vector<double> character_eigenvalues(const MigrationKernel& kernel) {
    const Geography& geo = kernel.geography();
    const std::size_t G = geo.size();
    const double m = geo.modulus();
    std::vector<std::vector<int>> offs;
    std::vector<double> rates;
    for (const auto& e : kernel.support()) {
        offs.push_back(geo.decode(e.offset));
        rates.push_back(e.rate);
    }
    std::vector<double> lam(G, 0.0);
    for (Site xi = 0; xi < G; ++xi) {
        const auto c = geo.decode(xi);
        double v = 0.0;
        for (std::size_t s = 0; s < offs.size(); ++s) {
            long dot = 0;
            for (std::size_t d = 0; d < c.size(); ++d) dot += static_cast<long>(c[d]) * offs[s][d];
            v += rates[s] * (std::cos(2.0 * std::numbers::pi * static_cast<double>(dot % geo.modulus()) / m) - 1.0);
        }
        lam[xi] = v;
    }
    return lam;
}

double spectral_gap(const MigrationKernel& kernel) {
    const auto lam = character_eigenvalues(kernel.symmetric() ? kernel : kernel.symmetrized());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < lam.size(); ++i) gap = std::min(gap, -lam[i]);
    return gap;
}

} // namespace seedbank
