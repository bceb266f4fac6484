#include "sres/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "sres/transport.hpp"

namespace sres {

namespace {

constexpr double kMergeTol = 1e-12;

bool inside_unit(double v) { return v >= 0.0 && v <= 1.0; }

void require_interior(const AtomicMeasure& x, const char* what) {
    if (!x.interior())
        throw Error(std::string(what) + ": measure has atoms on the boundary of the unit square");
}

// Weighted pool-adjacent-violators: nondecreasing least-squares fit.
std::vector<double> isotonic(const std::vector<double>& v, const std::vector<double>& w) {
    struct Block {
        double mean, weight;
        std::size_t len;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < v.size(); ++i) {
        blocks.push_back({v[i], w[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            double tw = a.weight + b.weight;
            a.mean = (a.mean * a.weight + b.mean * b.weight) / tw;
            a.weight = tw;
            a.len += b.len;
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const Block& b : blocks) out.insert(out.end(), b.len, b.mean);
    return out;
}

// Weighted projection of coordinates u onto configurations with pairwise
// gaps >= gap and boundary gaps >= gap. Order of coordinates is preserved.
std::vector<double> nudge_axis(const std::vector<double>& u, const std::vector<double>& w, double gap) {
    const std::size_t k = u.size();
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return u[a] < u[b]; });

    bool feasible = true;
    for (std::size_t r = 0; r < k; ++r) {
        double c = u[idx[r]];
        if (c < gap || c > 1.0 - gap) feasible = false;
        if (r > 0 && c - u[idx[r - 1]] < gap) feasible = false;
    }
    if (feasible) return u;

    std::vector<double> v(k), vw(k);
    for (std::size_t r = 0; r < k; ++r) {
        v[r] = u[idx[r]] - static_cast<double>(r) * gap;
        vw[r] = w[idx[r]];
    }
    // box-constrained isotonic regression = clipped isotonic regression
    std::vector<double> fit = isotonic(v, vw);
    const double lo = gap, hi = 1.0 - static_cast<double>(k) * gap;
    std::vector<double> out(k);
    for (std::size_t r = 0; r < k; ++r) {
        double c = std::clamp(fit[r], lo, hi);
        out[idx[r]] = c + static_cast<double>(r) * gap;
    }
    return out;
}

struct Cluster {
    double w = 0, wt = 0, ws = 0;
    std::vector<Atom> members;
    Point center() const { return {wt / w, ws / w}; }
    void add(const Atom& a) {
        w += a.w;
        wt += a.w * a.loc.t;
        ws += a.w * a.loc.s;
        members.push_back(a);
    }
};

double weighted_median(std::vector<std::pair<double, double>> vw) {
    std::sort(vw.begin(), vw.end());
    double total = 0;
    for (const auto& p : vw) total += p.second;
    double acc = 0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= total / 2) return p.first;
    }
    return vw.back().first;
}

double capped_cost(const std::vector<Atom>& members, Point p, GroundNorm norm) {
    double c = 0;
    for (const Atom& a : members) c += a.w * std::min(1.0, ground_distance(a.loc, p, norm));
    return c;
}

// Location minimizing sum w_i min(1, d(p, x_i)) over a few candidates: the
// centroid, the member atoms, the coordinate-wise median and (l2) a
// Weiszfeld refinement of the centroid.
Point median_location(const Cluster& c, GroundNorm norm) {
    std::vector<Point> cand{c.center()};
    for (const Atom& a : c.members) cand.push_back(a.loc);
    std::vector<std::pair<double, double>> tv, sv;
    for (const Atom& a : c.members) {
        tv.push_back({a.loc.t, a.w});
        sv.push_back({a.loc.s, a.w});
    }
    cand.push_back({weighted_median(tv), weighted_median(sv)});
    if (norm == GroundNorm::L2) {
        Point p = c.center();
        for (int it = 0; it < 100; ++it) {
            double nw = 0, nt = 0, ns = 0;
            for (const Atom& a : c.members) {
                double d = ground_distance(a.loc, p, norm);
                if (d < 1e-14 || d >= 1.0) continue;
                nw += a.w / d;
                nt += a.w * a.loc.t / d;
                ns += a.w * a.loc.s / d;
            }
            if (nw == 0) break;
            p = {nt / nw, ns / nw};
        }
        cand.push_back(p);
    }
    Point best = cand.front();
    double bc = capped_cost(c.members, best, norm);
    for (const Point& p : cand) {
        double v = capped_cost(c.members, p, norm);
        if (v < bc) {
            bc = v;
            best = p;
        }
    }
    return best;
}

// Turns clusters into an eps-separated interior measure. With centroids the
// cluster keeps its whole mass; with medians, members beyond unit distance
// are dropped since destroying them is cheaper than moving them.
AtomicMeasure place_clusters(const std::vector<Cluster>& clusters, double gap, GroundNorm norm, bool medians) {
    std::vector<double> ts, ss, ws;
    for (const Cluster& c : clusters) {
        if (c.w <= 0) continue;
        Point p = c.center();
        double w = c.w;
        if (medians) {
            p = median_location(c, norm);
            w = 0;
            for (const Atom& a : c.members)
                if (ground_distance(a.loc, p, norm) < 1.0) w += a.w;
            if (w <= 0) continue;
        }
        ts.push_back(p.t);
        ss.push_back(p.s);
        ws.push_back(w);
    }
    ts = nudge_axis(ts, ws, gap);
    ss = nudge_axis(ss, ws, gap);
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < ws.size(); ++i) atoms.push_back({{ts[i], ss[i]}, ws[i]});
    return AtomicMeasure(std::move(atoms));
}

std::vector<Cluster> greedy_clusters(const AtomicMeasure& x, int kmax, double eps, GroundNorm norm) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a].w > x[b].w; });

    std::vector<Cluster> clusters;
    for (std::size_t i : order) {
        const Atom& a = x[i];
        int best = -1;
        double bestd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            Point p = clusters[c].center();
            if (std::abs(a.loc.t - p.t) < eps && std::abs(a.loc.s - p.s) < eps) {
                double d = ground_distance(a.loc, p, norm);
                if (d < bestd) {
                    bestd = d;
                    best = static_cast<int>(c);
                }
            }
        }
        if (best < 0 && static_cast<int>(clusters.size()) < kmax) {
            clusters.emplace_back();
            best = static_cast<int>(clusters.size()) - 1;
        } else if (best < 0) {
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                double d = ground_distance(a.loc, clusters[c].center(), norm);
                if (d < bestd) {
                    bestd = d;
                    best = static_cast<int>(c);
                }
            }
        }
        clusters[best].add(a);
    }
    return clusters;
}

// Bottom-up alternative to the greedy pass: repeatedly merge the two
// clusters whose merge moves the least weighted distance.
std::vector<Cluster> agglomerate(const AtomicMeasure& x, int kmax, GroundNorm norm) {
    std::vector<Cluster> clusters;
    for (const Atom& a : x.atoms()) {
        clusters.emplace_back();
        clusters.back().add(a);
    }
    while (static_cast<int>(clusters.size()) > kmax) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const Cluster &a = clusters[i], &b = clusters[j];
                double c = a.w * b.w / (a.w + b.w) * ground_distance(a.center(), b.center(), norm);
                if (c < best) {
                    best = c;
                    bi = i;
                    bj = j;
                }
            }
        for (const Atom& a : clusters[bj].members) clusters[bi].add(a);
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return clusters;
}

std::vector<Cluster> reassign(const AtomicMeasure& x, const AtomicMeasure& centers, GroundNorm norm) {
    std::vector<Cluster> clusters(centers.size());
    for (const Atom& a : x.atoms()) {
        std::size_t best = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
            double d = ground_distance(a.loc, centers[c].loc, norm);
            if (d < bestd) {
                bestd = d;
                best = c;
            }
        }
        clusters[best].add(a);
    }
    return clusters;
}

}  // namespace

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms) {
    for (const Atom& a : atoms) {
        if (!std::isfinite(a.w) || !std::isfinite(a.loc.t) || !std::isfinite(a.loc.s))
            throw Error("atomic measure: non-finite atom");
        if (a.w < 0) throw Error("atomic measure: negative weight");
        if (!inside_unit(a.loc.t) || !inside_unit(a.loc.s))
            throw Error("atomic measure: location outside the unit square");
        if (a.w == 0) continue;
        bool merged = false;
        for (Atom& b : atoms_) {
            if (std::abs(a.loc.t - b.loc.t) <= kMergeTol && std::abs(a.loc.s - b.loc.s) <= kMergeTol) {
                b.w += a.w;
                merged = true;
                break;
            }
        }
        if (!merged) atoms_.push_back(a);
    }
}

bool AtomicMeasure::interior() const {
    return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) {
        return a.loc.t > 0 && a.loc.t < 1 && a.loc.s > 0 && a.loc.s < 1;
    });
}

std::vector<double> AtomicMeasure::t_coords() const {
    std::vector<double> out;
    for (const Atom& a : atoms_) out.push_back(a.loc.t);
    return out;
}

std::vector<double> AtomicMeasure::s_coords() const {
    std::vector<double> out;
    for (const Atom& a : atoms_) out.push_back(a.loc.s);
    return out;
}

AtomicMeasure AtomicMeasure::united(const AtomicMeasure& other) const {
    std::vector<Atom> all = atoms_;
    all.insert(all.end(), other.atoms_.begin(), other.atoms_.end());
    return AtomicMeasure(std::move(all));
}

AtomicMeasure AtomicMeasure::transposed() const {
    std::vector<Atom> all;
    for (const Atom& a : atoms_) all.push_back({{a.loc.s, a.loc.t}, a.w});
    return AtomicMeasure(std::move(all));
}

double sep(const AtomicMeasure& x) {
    if (x.empty()) throw Error("undefined separation: empty measure");
    require_interior(x, "sep");
    double nu = std::numeric_limits<double>::infinity();
    for (auto coords : {x.t_coords(), x.s_coords()}) {
        std::sort(coords.begin(), coords.end());
        nu = std::min({nu, coords.front(), 1.0 - coords.back()});
        for (std::size_t i = 1; i < coords.size(); ++i) nu = std::min(nu, coords[i] - coords[i - 1]);
    }
    return nu;
}

double tv_norm(const AtomicMeasure& x) {
    double total = 0;
    for (const Atom& a : x.atoms()) total += a.w;
    return total;
}

bool Neighborhood::contains(Point p) const { return index_of(p) >= 0; }

int Neighborhood::index_of(Point p) const {
    for (std::size_t k = 0; k < centers.size(); ++k) {
        const Point& c = centers[k];
        bool in = false;
        switch (kind) {
        case Kind::Joint:
            in = std::abs(p.t - c.t) <= radius && std::abs(p.s - c.s) <= radius;
            break;
        case Kind::TAxis:
            in = std::abs(p.t - c.t) <= radius;
            break;
        case Kind::SAxis:
            in = std::abs(p.s - c.s) <= radius;
            break;
        }
        if (in) return static_cast<int>(k);
    }
    return -1;
}

double Neighborhood::mass(const AtomicMeasure& x, std::size_t k) const {
    Neighborhood single{{centers.at(k)}, radius, kind};
    double m = 0;
    for (const Atom& a : x.atoms())
        if (single.contains(a.loc)) m += a.w;
    return m;
}

double Neighborhood::mass_outside(const AtomicMeasure& x) const {
    double m = 0;
    for (const Atom& a : x.atoms())
        if (!contains(a.loc)) m += a.w;
    return m;
}

Neighborhood joint_neighborhood(const AtomicMeasure& support, double eps) {
    Neighborhood nb;
    for (const Atom& a : support.atoms()) nb.centers.push_back(a.loc);
    nb.radius = eps;
    return nb;
}

GroundNorm parse_ground_norm(const std::string& name) {
    if (name == "l2") return GroundNorm::L2;
    if (name == "linf") return GroundNorm::Linf;
    if (name == "l1") return GroundNorm::L1;
    throw Error("unknown ground norm '" + name + "' (expected l2, linf or l1)");
}

std::string to_string(GroundNorm norm) {
    switch (norm) {
    case GroundNorm::L2: return "l2";
    case GroundNorm::Linf: return "linf";
    case GroundNorm::L1: return "l1";
    }
    return "l2";
}

double ground_distance(Point a, Point b, GroundNorm norm) {
    double dt = std::abs(a.t - b.t), ds = std::abs(a.s - b.s);
    switch (norm) {
    case GroundNorm::L2: return std::hypot(dt, ds);
    case GroundNorm::Linf: return std::max(dt, ds);
    case GroundNorm::L1: return dt + ds;
    }
    return std::hypot(dt, ds);
}

SparseApprox approximate_sparse(const AtomicMeasure& x, int K, double eps, double lambda, GroundNorm norm) {
    if (K < 1) throw Error("approximate_sparse: K must be >= 1");
    if (!(eps > 0) || eps > 0.5) throw Error("approximate_sparse: eps must lie in (0, 1/2]");
    if (!(lambda > 1)) throw Error("approximate_sparse: lambda must exceed 1");
    if (static_cast<double>(K + 1) * eps > 1.0 + 1e-12)
        throw Error("approximate_sparse: infeasible geometry, K atoms cannot be eps-separated in the interior");
    require_interior(x, "approximate_sparse");

    // a hair above eps so rounding never pushes a gap below eps
    double gap = eps * (1.0 + 1e-12);
    if (static_cast<double>(K + 1) * gap > 1.0) gap = eps;

    SparseApprox best;
    best.measure = AtomicMeasure();
    best.residual = tv_norm(x);
    auto consider = [&](const AtomicMeasure& chi) {
        double r = gw_distance(x, chi, norm);
        if (r < best.residual) {
            best.residual = r;
            best.measure = chi;
        }
        return r;
    };

    if (!x.empty()) {
        for (int kp = 1; kp <= K; ++kp) {
            for (const auto& start : {greedy_clusters(x, kp, eps, norm), agglomerate(x, kp, norm)}) {
                for (bool medians : {false, true}) {
                    AtomicMeasure chi = place_clusters(start, gap, norm, medians);
                    double r = consider(chi);
                    // a few Lloyd-style refinements from the nudged centers
                    for (int it = 0; it < 10 && !chi.empty(); ++it) {
                        AtomicMeasure next = place_clusters(reassign(x, chi, norm), gap, norm, medians);
                        double rn = consider(next);
                        if (rn >= r - 1e-15) break;
                        chi = next;
                        r = rn;
                    }
                }
            }
        }
    }

    if (x.size() <= 6 && K <= 3) {
        double oracle = placement_oracle(x, K, eps, 50, norm);
        best.oracle_residual = oracle;
        best.certified = best.residual <= lambda * oracle + 1e-12;
    }
    return best;
}

double placement_oracle(const AtomicMeasure& x, int K, double eps, int grid_n, GroundNorm norm) {
    const std::size_t n = x.size();
    if (n > 6 || K > 3) throw Error("placement_oracle: limited to 6 atoms and K <= 3");
    if (grid_n < 2) throw Error("placement_oracle: grid needs at least 2 nodes");
    if (n == 0) return 0.0;

    std::vector<double> axis;
    for (int i = 0; i < grid_n; ++i) {
        double c = static_cast<double>(i) / (grid_n - 1);
        if (c >= eps - 1e-12 && c <= 1.0 - eps + 1e-12) axis.push_back(c);
    }
    std::vector<Point> cand;
    for (double t : axis)
        for (double s : axis) cand.push_back({t, s});

    double best = tv_norm(x);
    if (cand.empty()) return best;

    // enumerate set partitions of the atoms into at most K groups
    std::vector<int> label(n, 0);
    std::function<void(std::size_t, int)> partitions = [&](std::size_t i, int used) {
        if (i == n) {
            const int g = used;
            std::vector<std::vector<double>> cost(g, std::vector<double>(cand.size(), 0.0));
            for (std::size_t p = 0; p < cand.size(); ++p)
                for (std::size_t a = 0; a < n; ++a)
                    cost[label[a]][p] += x[a].w * std::min(1.0, ground_distance(x[a].loc, cand[p], norm));
            std::vector<std::vector<std::size_t>> order(g);
            std::vector<double> floor(g + 1, 0.0);
            for (int k = 0; k < g; ++k) {
                order[k].resize(cand.size());
                std::iota(order[k].begin(), order[k].end(), 0);
                std::stable_sort(order[k].begin(), order[k].end(),
                                 [&](std::size_t a, std::size_t b) { return cost[k][a] < cost[k][b]; });
            }
            for (int k = g - 1; k >= 0; --k) floor[k] = floor[k + 1] + cost[k][order[k][0]];

            std::vector<std::size_t> chosen;
            std::function<void(int, double)> search = [&](int k, double partial) {
                if (k == g) {
                    best = std::min(best, partial);
                    return;
                }
                for (std::size_t p : order[k]) {
                    double c = partial + cost[k][p];
                    if (c + floor[k + 1] >= best) break;
                    bool ok = true;
                    for (std::size_t q : chosen)
                        if (std::abs(cand[p].t - cand[q].t) < eps - 1e-12 ||
                            std::abs(cand[p].s - cand[q].s) < eps - 1e-12) {
                            ok = false;
                            break;
                        }
                    if (!ok) continue;
                    chosen.push_back(p);
                    search(k + 1, c);
                    chosen.pop_back();
                }
            };
            search(0, 0.0);
            return;
        }
        for (int l = 0; l < std::min(used + 1, K); ++l) {
            label[i] = l;
            partitions(i + 1, std::max(used, l + 1));
        }
    };
    partitions(0, 0);
    return best;
}

}  // namespace sres
