#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "sres/imaging.hpp"
#include "sres/measures.hpp"

namespace sres {

using json = nlohmann::json;

// Malformed or inconsistent configuration input.
class ConfigError : public Error {
public:
    using Error::Error;
};

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

json measure_to_json(const AtomicMeasure& x);
AtomicMeasure measure_from_json(const json& j);

// {"kind":"gaussian","sigma":0.2,"centers":[...]} or {"kind":"gaussian","sigma":0.2,"M":5},
// {"kind":"monomial","M":3}, {"kind":"tabulated","nodes":[...],"values":[[...],...]}
Window window_from_json(const json& j);
json window_to_json(const Window& w);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// y as CSV plus a sidecar <stem>.json holding {"delta": ...}
void write_observation(const std::filesystem::path& csv_path, const Observation& obs);
Observation read_observation(const std::filesystem::path& csv_path);

}  // namespace sres
