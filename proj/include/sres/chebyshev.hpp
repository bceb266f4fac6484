#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sres/certificates.hpp"
#include "sres/imaging.hpp"

namespace sres {

// Randomized check that det[phi_m(tau_k)] never vanishes and keeps one sign
// over increasing sequences. Determinants are computed in 100-digit
// arithmetic after scaling each row to unit max-abs.
struct TsystemReport {
    bool passed = false;
    int trials = 0;
    int positive = 0, negative = 0, zero = 0;
    double min_abs_det = 0.0;
    std::vector<double> worst_sequence;
    double zero_threshold = 1e-80;
};

TsystemReport check_tsystem(const Window& w, int trials, std::uint64_t seed);

struct LimitPoint {
    double point = 0.0;
    int multiplicity = 1;
};

// Node sequences 0 < clusters < 1 whose clusters collapse onto the limit
// points at spacing h0/n.
class AdmissibleSequence {
public:
    AdmissibleSequence(std::vector<LimitPoint> limits, int singleton, int M, double h0);

    std::vector<double> sequence(int n) const;
    int M() const { return M_; }
    // position of the singleton node within every generated sequence
    int singleton_row() const { return row_; }
    const std::vector<LimitPoint>& limits() const { return limits_; }

private:
    std::vector<LimitPoint> limits_;
    int singleton_ = 0;
    int M_ = 0;
    double h0_ = 0.0;
    int row_ = 0;
};

AdmissibleSequence make_admissible(std::vector<LimitPoint> limits, int singleton, int M, double h0);

struct TstarReport {
    bool passed = false;
    bool part1 = false;
    bool part2_applicable = false;
    bool part2 = false;
    std::vector<int> n_values;
    std::vector<double> determinants;     // signed, row-normalized
    std::vector<std::vector<double>> log_minors;  // [n][column]
    std::vector<double> slopes;           // per deleted column
    double slope_spread = 0.0;
    double det_tolerance = 1e-9;
    double slope_tolerance = 0.1;
    std::string note;
};

TstarReport check_tstar(const PlateauTarget& F, const Window& w, const AdmissibleSequence& seq,
                        const std::vector<int>& n_values);

}  // namespace sres
