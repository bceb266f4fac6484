#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sres {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Point {
    double t = 0.0;
    double s = 0.0;
};

struct Atom {
    Point loc;
    double w = 0.0;
};

// Nonnegative weighted point set on [0,1]^2. Zero weights are dropped and
// atoms closer than 1e-12 in both coordinates are merged.
class AtomicMeasure {
public:
    AtomicMeasure() = default;
    explicit AtomicMeasure(std::vector<Atom> atoms);

    const std::vector<Atom>& atoms() const { return atoms_; }
    const Atom& operator[](std::size_t i) const { return atoms_[i]; }
    std::size_t size() const { return atoms_.size(); }
    bool empty() const { return atoms_.empty(); }

    // true iff every coordinate lies strictly inside (0,1)
    bool interior() const;

    std::vector<double> t_coords() const;
    std::vector<double> s_coords() const;

    AtomicMeasure united(const AtomicMeasure& other) const;
    AtomicMeasure transposed() const;

private:
    std::vector<Atom> atoms_;
};

double sep(const AtomicMeasure& x);
double tv_norm(const AtomicMeasure& x);

// Union of closed boxes (joint) or bands (axis) around a set of centers.
struct Neighborhood {
    enum class Kind { Joint, TAxis, SAxis };

    std::vector<Point> centers;
    double radius = 0.0;
    Kind kind = Kind::Joint;

    bool contains(Point p) const;
    // index of the first center whose neighborhood contains p, or -1
    int index_of(Point p) const;
    // total weight of x inside the neighborhood of center k
    double mass(const AtomicMeasure& x, std::size_t k) const;
    // total weight of x outside every neighborhood
    double mass_outside(const AtomicMeasure& x) const;
};

Neighborhood joint_neighborhood(const AtomicMeasure& support, double eps);

enum class GroundNorm { L2, Linf, L1 };

GroundNorm parse_ground_norm(const std::string& name);
std::string to_string(GroundNorm norm);
double ground_distance(Point a, Point b, GroundNorm norm);

struct SparseApprox {
    AtomicMeasure measure;
    double residual = 0.0;
    bool certified = false;
    std::optional<double> oracle_residual;
};

// Greedy K-sparse, eps-separated witness for x together with its d_GW residual.
SparseApprox approximate_sparse(const AtomicMeasure& x, int K, double eps, double lambda,
                                GroundNorm norm = GroundNorm::L2);

// Minimum of d_GW(x, chi) over chi with at most K atoms placed on the
// grid {i/(n-1)} (eps-separated, interior). Weights of chi are optimized
// in closed form. Limited to small instances.
double placement_oracle(const AtomicMeasure& x, int K, double eps, int grid_n = 50,
                        GroundNorm norm = GroundNorm::L2);

}  // namespace sres
